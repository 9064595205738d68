"""
qubitdyne: qubit-mediated homodyne and heterodyne detection of a cavity mode.
"""

__version__ = "0.1.0"
