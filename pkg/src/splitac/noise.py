"""Seeded space-time white-noise increments on a uniform mesh.

The increment of the noise over one time step, projected on the nodal
basis, is a vector of i.i.d. Normal(0, dt/dx) draws, independent across
steps and across interior nodes.  Draws are addressed by counter, not
by stream position: step ``n`` of stream ``(master_seed, replica_id)``
owns a fixed block of Philox counters, so any step, or any contiguous
range of steps, can be generated independently, in any order, on any
worker, with bit-identical results.

Normals come from the inverse normal CDF applied to 53-bit uniforms
built from one 64-bit Philox word each (one word per node, padded to
whole 4-word Philox blocks per step).  This keeps the word consumption
of a step fixed, which is what makes random access exact.

Dyadic coupling is plain summation: the increment over a step of size
2*dt is the sum of the two increments over the contained steps of size
dt, reproducing the "same Wiener path" comparison between a coarse and
a fine time discretization.
"""

from dataclasses import dataclass, replace

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .grid import GridFunction, Mesh

_MASK64 = (1 << 64) - 1
_INV_2_53 = 2.0**-53


@dataclass(frozen=True)
class NoisePlan:
    """Addressing scheme for the increments of one noise realization.

    Distinct ``(master_seed, replica_id)`` pairs give independent
    streams; regenerating with identical fields reproduces increments
    bit for bit.  ``dt_fine`` is the finest (level-0) time step;
    ``n_levels`` dyadic coarsenings on top of it are supported.
    """

    master_seed: int
    replica_id: int
    mesh: Mesh
    dt_fine: float
    n_levels: int = 1

    def __post_init__(self):
        if self.dt_fine <= 0:
            raise ValueError("dt_fine must be positive")
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")
        if self.replica_id < 0:
            raise ValueError("replica_id must be nonnegative")

    @property
    def node_scale(self) -> float:
        """Standard deviation sqrt(dt_fine/dx) of one level-0 nodal draw."""
        return float(np.sqrt(self.dt_fine / self.mesh.dx))

    def _key(self) -> int:
        return ((self.replica_id & _MASK64) << 64) | (self.master_seed & _MASK64)

    def _blocks_per_step(self) -> int:
        # one 64-bit word per node, padded to whole 4-word Philox blocks
        return (self.mesh.n_interior + 3) // 4


@dataclass(frozen=True)
class IncrementBlock:
    """Noise increment of one time step at one coarsening level."""

    level: int
    step_index: int
    values: GridFunction

    @property
    def mesh(self) -> Mesh:
        return self.values.mesh


def standard_normals(plan: NoisePlan, start: int, stop: int) -> np.ndarray:
    """Unit-variance draws for fine steps ``start..stop-1``.

    Returns an array of shape (stop - start, n_interior).  Row ``i``
    is bit-identical to the draw obtained when step ``start + i`` is
    generated on its own, because steps own disjoint, contiguous
    counter ranges.
    """
    if not 0 <= start <= stop:
        raise ValueError("need 0 <= start <= stop")
    n = plan.mesh.n_interior
    n_steps = stop - start
    if n_steps == 0:
        return np.empty((0, n))
    bps = plan._blocks_per_step()
    gen = Generator(Philox(key=plan._key(), counter=start * bps))
    words = gen.integers(0, 2**64, dtype=np.uint64, size=n_steps * 4 * bps)
    words = words.reshape(n_steps, 4 * bps)[:, :n]
    u = ((words >> np.uint64(11)) + np.float64(0.5)) * _INV_2_53
    return ndtri(u)


def fine_increment(plan: NoisePlan, n: int) -> IncrementBlock:
    """Level-0 increment of step ``n``: i.i.d. Normal(0, dt_fine/dx) nodes."""
    if n < 0:
        raise ValueError("step index must be nonnegative")
    xi = standard_normals(plan, n, n + 1)[0]
    return IncrementBlock(0, n, GridFunction(plan.mesh, plan.node_scale * xi))


def coarsen(fine_a: IncrementBlock, fine_b: IncrementBlock) -> IncrementBlock:
    """Sum two consecutive increments into one at the next level up.

    ``fine_a`` must sit at an even step index 2n and ``fine_b`` at
    2n + 1 on the same level; the result is step n one level up.
    """
    if fine_a.level != fine_b.level:
        raise ValueError(
            f"level mismatch: {fine_a.level} vs {fine_b.level}"
        )
    if fine_a.step_index % 2 != 0 or fine_b.step_index != fine_a.step_index + 1:
        raise ValueError(
            f"steps {fine_a.step_index}, {fine_b.step_index} are not an "
            "aligned (2n, 2n+1) pair"
        )
    if fine_a.mesh != fine_b.mesh:
        raise ValueError("mesh mismatch")
    summed = fine_a.values.values + fine_b.values.values
    return IncrementBlock(
        fine_a.level + 1,
        fine_a.step_index // 2,
        GridFunction(fine_a.mesh, summed),
    )


def increment(plan: NoisePlan, level: int, n: int) -> IncrementBlock:
    """Increment of step ``n`` at a coarsening level, by pairwise sums."""
    if not 0 <= level <= plan.n_levels:
        raise ValueError(f"level {level} outside 0..{plan.n_levels}")
    if level == 0:
        return fine_increment(plan, n)
    return coarsen(
        increment(plan, level - 1, 2 * n), increment(plan, level - 1, 2 * n + 1)
    )


def increments_at_level(
    plan: NoisePlan, level: int, start: int, stop: int
) -> np.ndarray:
    """Increment values for steps ``start..stop-1`` at a coarsening level.

    Returns shape (stop - start, n_interior).  Rows match the
    recursive pairwise ``coarsen`` tree bit for bit.
    """
    if not 0 <= level <= plan.n_levels:
        raise ValueError(f"level {level} outside 0..{plan.n_levels}")
    factor = 1 << level
    vals = plan.node_scale * standard_normals(
        plan, start * factor, stop * factor
    )
    for _ in range(level):
        vals = vals[0::2] + vals[1::2]
    return vals


def replica_stream(plan: NoisePlan, new_replica: int) -> NoisePlan:
    """Same plan pointed at a different independent replica stream."""
    return replace(plan, replica_id=new_replica)
