#!/usr/bin/env python3
"""
Demo script: simulate a small homodyne dataset and compare it with the
ideal quadrature distribution.
"""
import sys
from pathlib import Path
import argparse

# Add src to path
src_path = Path(__file__).parent.parent
sys.path.insert(0, str(src_path))

from src.collision.schedule import CollisionSchedule, PHI_SWAP
from src.evaluation.convergence import sample_homodyne
from src.evaluation.statistics import ks_critical_value, ks_statistic, reference_cdf
from src.fockspace.states import prepare_state
from src.utils.logging_config import setup_logging


# Example states for demo
EXAMPLE_STATES = {
    'vacuum': {'kind': 'vacuum'},
    'fock2': {'kind': 'fock', 'n': 2},
    'cat': {'kind': 'cat', 'alpha': 2.0},
    'coherent': {'kind': 'coherent', 'alpha': 2.0},
}


def main():
    """Run demo simulation."""
    parser = argparse.ArgumentParser(description='Demo homodyne simulation')
    parser.add_argument(
        '--state',
        type=str,
        choices=list(EXAMPLE_STATES.keys()),
        default='vacuum',
        help='Initial cavity state'
    )
    parser.add_argument('--n-traj', type=int, default=1000, help='Number of trajectories')
    parser.add_argument('--n-bit', type=int, default=200, help='Qubit measurements per trajectory')
    parser.add_argument('--seed', type=int, default=1, help='Global seed')

    args = parser.parse_args()
    logger = setup_logging()

    state = prepare_state(n_fock=30, **EXAMPLE_STATES[args.state])
    schedule = CollisionSchedule.homodyne(0.1 * PHI_SWAP, args.n_bit)

    logger.info(f"\n{'='*60}")
    logger.info(f"Homodyne Demo: {state.label}")
    logger.info(f"{'='*60}")

    try:
        sample, _ = sample_homodyne(state, schedule, 0.0, args.n_traj, args.seed)
        ks = ks_statistic(sample, reference_cdf(state, 0.0))
        summary = sample.summary()

        logger.info(f"Samples: {summary['n']}")
        logger.info(f"Mean: {summary['mean']:.4f} +/- {summary['standard_error']:.4f}")
        logger.info(f"Variance: {summary['variance']:.4f}")
        logger.info(f"KS distance: {ks:.4f} (99% critical value {ks_critical_value(len(sample)):.4f})")
        return 0

    except Exception as e:
        logger.error(f"Demo failed: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
