"""
Named experiment presets, sized to run on a desktop.

Each preset is a plain mapping in the experiment-file layout; values not
given fall back to the ExperimentConfig defaults.
"""
import math

# Cavity lifetime example: one measurement step T = 1 µs, T1 = 500 µs
STEP_DURATION = 1e-6
CAVITY_LIFETIME = 500e-6
LIFETIME_KAPPA = 1.0 / CAVITY_LIFETIME

WEAK_COUPLING = 0.1  # φ = 0.1 φ_SWAP
RAMP_SLOPE = 0.0018

# Homodyne tomography of a cat state (also used for Fock |2> and coherent α=2)
FIG2_PRESET = {
    "name": "fig2",
    "state": {"kind": "cat", "alpha": 2.0},
    "schedule": {"phi_swap_fraction": WEAK_COUPLING, "n_bit": 200},
    "run": {"mode": "homodyne-multi-angle", "n_angles": 10, "n_traj": 1000},
}

# Fidelity and residual population versus measurement-round length
FIG3_PRESET = {
    "name": "fig3",
    "state": {"kind": "cat", "alpha": 2.0},
    "schedule": {"phi_swap_fraction": WEAK_COUPLING, "n_bit": 300},
    "run": {"n_traj": 1000},
    "sweep": {
        "parameter": "n_bit",
        "values": [25, 50, 75, 100, 125, 150, 175, 200, 250, 300],
        "n_angles": 10,
    },
}

# Heterodyne statistics of a coherent state
FIG4_PRESET = {
    "name": "fig4",
    "state": {"kind": "coherent", "alpha": 2.0},
    "schedule": {"phi_swap_fraction": WEAK_COUPLING, "n_bit": 300},
    "run": {"mode": "heterodyne", "n_traj": 10000},
}

# Interaction-strength sweep with cavity loss, κT = 0.002, <n> = 6
FIG5_PRESET = {
    "name": "fig5",
    "state": {"kind": "coherent", "alpha": math.sqrt(6.0)},
    "schedule": {
        "phi_swap_fraction": WEAK_COUPLING,
        "n_bit": 200,
        "dt": STEP_DURATION,
        "kappa": LIFETIME_KAPPA,
    },
    "run": {"n_traj": 1000},
    "sweep": {
        "parameter": "phi",
        "values": [f * math.pi / 2 for f in (0.02, 0.03, 0.05, 0.07, 0.1, 0.15, 0.2, 0.3)],
        "n_angles": 10,
        "vacuum_fraction": 0.95,
        "compensate": True,
    },
}

# Linear coupling ramp empties the cavity in fewer steps
FIGS1_PRESET = {
    "name": "figS1",
    "state": {"kind": "cat", "alpha": 2.0},
    "schedule": {"phi_swap_fraction": WEAK_COUPLING, "ramp_slope": RAMP_SLOPE, "n_bit": 200},
    "run": {"mode": "homodyne-multi-angle", "n_angles": 10, "n_traj": 1000},
}

# Iterative phase estimation of a single photon
FIGS2_PRESET = {
    "name": "figS2",
    "state": {"kind": "fock", "n": 1},
    "run": {"mode": "phase-est", "n_traj": 500},
    "phase_est": {"protocol": "iterative", "n_m": 100},
}

LIFETIME_PRESET = {
    "name": "lifetime",
    "state": {"kind": "coherent", "alpha": math.sqrt(6.0)},
    "schedule": {
        "phi_swap_fraction": WEAK_COUPLING,
        "n_bit": 200,
        "dt": STEP_DURATION,
        "kappa": LIFETIME_KAPPA,
    },
    "run": {"n_traj": 1000},
}

PRESETS = {
    "fig2": FIG2_PRESET,
    "fig3": FIG3_PRESET,
    "fig4": FIG4_PRESET,
    "fig5": FIG5_PRESET,
    "figS1": FIGS1_PRESET,
    "figS2": FIGS2_PRESET,
    "lifetime": LIFETIME_PRESET,
}
