#!/usr/bin/env python3
"""
Offline check of the closed-form cluster-position distributions against enumeration
"""

import sys
import logging
from pathlib import Path

# Add parent directory to path to import fraglab modules
sys.path.append(str(Path(__file__).parent.parent))

from fraglab.exceptions import FraglabError
from fraglab.services.fragments import sector_range
from fraglab.services.sliomstats import analytic_distributions, brute_force_distributions

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MAX_ENUMERATED_ATOMS = 30


def _mismatches(n_atoms: int, sector=None) -> int:
    analytic = analytic_distributions(n_atoms, sector=sector)
    brute = brute_force_distributions(n_atoms, sector=sector)
    bad = 0
    for k, dist in brute.items():
        expected = {x: w for x, w in analytic[k].weights.items() if w}
        if expected != dist.weights:
            logger.error(f"N_a={n_atoms} sector={sector} k={k}: distributions differ")
            bad += 1
    return bad


def check_sizes(first: int, last: int, sectors: bool) -> int:
    """Compare every cluster index for each chain length; returns the number of mismatches"""
    failures = 0
    for n_atoms in range(first, last + 1):
        failures += _mismatches(n_atoms)
        if sectors:
            for sector in sector_range(n_atoms):
                failures += _mismatches(n_atoms, sector)
        logger.info(f"N_a={n_atoms} checked")
    return failures


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Closed-form vs enumerated SLIOM distributions")
    parser.add_argument("--first", type=int, default=1, help="Smallest chain length")
    parser.add_argument("--last", type=int, default=20, help="Largest chain length")
    parser.add_argument(
        "--sectors",
        action="store_true",
        help="Also compare every cluster-number sector"
    )

    args = parser.parse_args()

    if args.last > MAX_ENUMERATED_ATOMS or args.first < 1 or args.first > args.last:
        logger.error(f"Chain lengths must satisfy 1 <= first <= last <= {MAX_ENUMERATED_ATOMS}")
        sys.exit(2)

    try:
        failures = check_sizes(args.first, args.last, args.sectors)
    except FraglabError as e:
        logger.error(f"Check failed: {e}")
        sys.exit(e.exit_code)

    if failures:
        logger.error(f"{failures} mismatching distribution(s)")
        sys.exit(1)
    logger.info("All distributions match")
