""""""

