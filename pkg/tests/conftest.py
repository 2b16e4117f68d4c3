import numpy as np
import pytest

import ilukit as ik
from ilukit.ordering import LOWER_A_PLUS_AT


def make_partition(schedule, cut, config=None):
    """StagePartition with the cut forced at the given level index."""
    levels = schedule.levels
    upper = [rows.copy() for rows in levels[:cut]]
    lower = (
        np.concatenate([levels[i] for i in range(cut, len(levels))])
        if cut < len(levels)
        else np.zeros(0, dtype=np.int64)
    )
    return ik.StagePartition(
        upper, lower, cut, config or ik.PartitionConfig(),
        schedule.source_pattern_kind,
    )


contiguous_partition = ik.contiguous_partition


def level_ordered_factors(a, cut=None, k=0, tau=0.0, milu=False, config=None):
    """Full front end: levels on lower(A+A^T), partition, permute, assemble.

    cut=None lets partition_stages decide; an integer forces the cut level.
    Returns (factors, partition-in-new-indexing, permutation).
    """
    src = ik.lower_pattern(ik.symmetrize_pattern(a.pattern))
    schedule = ik.compute_levels(src, LOWER_A_PLUS_AT)
    if cut is None:
        partition = ik.partition_stages(schedule, np.diff(a.row_start), config)
    else:
        partition = make_partition(schedule, cut, config)
    perm = ik.build_level_permutation(partition)
    pat, _ = ik.iluk_pattern(ik.permute_symmetric(a, perm).pattern, k)
    factors = ik.assemble_factors(a, pat, perm, tau, milu)
    return factors, contiguous_partition(partition), perm


def serial_factored(factors):
    """Fresh copy factored by the serial reference."""
    ref = factors.copy()
    ik.factor_serial(ref)
    return ref


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
