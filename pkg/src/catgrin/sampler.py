"""Monte Carlo simulation of individual post-selected trials.

Each trial draws the post-selection outcome (success with probability
P{E_f}) and a readout pair (x, y) from that branch's conditional law,
then forms the signed product c = +xy on success and c = -xy on failure.
Averaging c over many trials estimates twice the interference indicator,
C = 2 C(E_f).

Randomness is counter-based and splittable: trials are generated in
fixed-size chunks, chunk k drawing from a Philox stream with key ``seed``
and counter block k * 2**64, so generation is reproducible bit-for-bit
and independent of scheduling order.  Readout noise uses the disjoint
counter block at 2**128.

Within a branch, (x, y) is drawn by rejection from the branch's signed
six-component Gaussian mixture: propose from the same mixture with
absolute weights, accept with ratio (signed density) / (absolute-weight
envelope).  The acceptance rate equals N / sum|weights|; if it falls
below 1%, sampling falls back to inverse-CDF lookup on a 512x512 grid
with in-cell jitter (bias of order the cell width), recorded in the
table metadata.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hilbert import complement
from .statistics import (
    Experiment,
    complement_experiment,
    joint_terms,
    postselection_probability,
)

CHUNK_SIZE = 4096
FALLBACK_ACCEPTANCE = 0.01
GRID_FALLBACK_SIDE = 512
_NOISE_COUNTER_BLOCK = 1 << 128

THREADS_ENV_VAR = "CHESHIRE_THREADS"


@dataclass(frozen=True)
class TrialRecord:
    """One simulated run."""

    trial_index: int
    postselected: bool
    x: float
    y: float
    c: float


@dataclass(frozen=True)
class SamplerConfig:
    """Trial count, RNG seed, and optional additive readout noise stds."""

    n_trials: int
    seed: int
    noise: tuple[float, float] | None = None

    def __post_init__(self):
        if int(self.n_trials) < 1:
            raise ValidationError("sampler: n_trials must be >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValidationError("sampler: seed must fit in 64 bits")
        if self.noise is not None:
            nx, ny = self.noise
            if nx < 0.0 or ny < 0.0:
                raise ValidationError("sampler: noise stds must be nonnegative")


class TrialTable:
    """Column-oriented sequence of TrialRecord values."""

    def __init__(self, trial_index, postselected, x, y, c, metadata=None):
        self.trial_index = np.asarray(trial_index, dtype=np.int64)
        self.postselected = np.asarray(postselected, dtype=bool)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.metadata = dict(metadata or {})
        n = self.trial_index.size
        if not (self.postselected.size == self.x.size == self.y.size == self.c.size == n):
            raise ValidationError("trial table: column lengths differ")

    def __len__(self) -> int:
        return int(self.trial_index.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return TrialTable(
                self.trial_index[i], self.postselected[i], self.x[i], self.y[i],
                self.c[i], self.metadata,
            )
        return TrialRecord(
            trial_index=int(self.trial_index[i]),
            postselected=bool(self.postselected[i]),
            x=float(self.x[i]),
            y=float(self.y[i]),
            c=float(self.c[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


class _BranchSampler:
    """Draws (x, y) from one branch's conditional readout law."""

    def __init__(self, exp: Experiment):
        terms = joint_terms(exp.family, exp.w_x, exp.w_y)
        self.weights = np.array([t.weight for t in terms])
        self.centers = np.array([[t.mu_x, t.mu_y] for t in terms])
        self.sd = np.array([exp.meter_x.spread, exp.meter_y.spread])
        self.norm = float(self.weights.sum())
        self.abs_weights = np.abs(self.weights)
        self.envelope_mass = float(self.abs_weights.sum())
        self.acceptance = self.norm / self.envelope_mass
        self.component_p = self.abs_weights / self.envelope_mass
        self.used_grid_fallback = self.acceptance < FALLBACK_ACCEPTANCE
        self._grid = self._build_grid() if self.used_grid_fallback else None

    def _mixture_ratio(self, pts: np.ndarray) -> np.ndarray:
        # (signed density) / (absolute-weight envelope) at pts, in [0, 1].
        z = (pts[:, None, :] - self.centers[None, :, :]) / self.sd[None, None, :]
        phi = np.exp(-0.5 * np.sum(z ** 2, axis=2))
        num = phi @ self.weights
        den = phi @ self.abs_weights
        out = np.zeros(pts.shape[0])
        good = den > 0.0
        out[good] = np.clip(num[good] / den[good], 0.0, 1.0)
        return out

    def _build_grid(self):
        side = GRID_FALLBACK_SIDE
        half_x = 8.0 * self.sd[0] + 2.0
        half_y = 8.0 * self.sd[1] + 2.0
        xs = np.linspace(-half_x, half_x, side + 1)
        ys = np.linspace(-half_y, half_y, side + 1)
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        pts = np.stack(
            [np.repeat(cx, side), np.tile(cy, side)], axis=1
        )
        z = (pts[:, None, :] - self.centers[None, :, :]) / self.sd[None, None, :]
        dens = np.exp(-0.5 * np.sum(z ** 2, axis=2)) @ self.weights
        dens = np.clip(dens, 0.0, None)
        cdf = np.cumsum(dens)
        cdf /= cdf[-1]
        return cdf, cx, cy, float(xs[1] - xs[0]), float(ys[1] - ys[0])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n == 0:
            return np.empty((0, 2))
        if self.used_grid_fallback:
            return self._sample_grid(n, rng)
        return self._sample_rejection(n, rng)

    def _sample_grid(self, n, rng):
        cdf, cx, cy, hx, hy = self._grid
        side = cx.size
        cells = np.searchsorted(cdf, rng.random(n), side="right")
        cells = np.minimum(cells, cdf.size - 1)
        ix, iy = cells // side, cells % side
        jitter = rng.random((n, 2)) - 0.5
        return np.stack(
            [cx[ix] + jitter[:, 0] * hx, cy[iy] + jitter[:, 1] * hy], axis=1
        )

    def _sample_rejection(self, n, rng):
        out = np.empty((n, 2))
        need = np.arange(n)
        for _ in range(100_000):
            m = need.size
            if m == 0:
                return out
            comp = rng.choice(self.weights.size, size=m, p=self.component_p)
            pts = self.centers[comp] + rng.standard_normal((m, 2)) * self.sd
            accept = rng.random(m) < self._mixture_ratio(pts)
            out[need[accept]] = pts[accept]
            need = need[~accept]
        raise RuntimeError("rejection sampling failed to terminate")


def _chunk_stream(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=chunk << 64))


def thread_count() -> int:
    """Worker cap from the CHESHIRE_THREADS environment variable (default 1)."""
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    return max(1, n)


def sample_trials(exp: Experiment, cfg: SamplerConfig) -> TrialTable:
    """Simulate cfg.n_trials independent post-selected runs.

    Reproducible bit-for-bit from cfg.seed.  If cfg.noise is set, the
    returned records already carry the additive readout noise (equivalent
    to apply_readout_noise on the noiseless table with the same seed).
    """
    p_success = postselection_probability(exp)
    success = _BranchSampler(exp)
    e_prime = complement(exp.e_f)
    if e_prime.trace() > 1e-12 and p_success < 1.0 - 1e-15:
        failure = _BranchSampler(complement_experiment(exp))
    else:
        failure = None
        p_success = 1.0

    n = int(cfg.n_trials)
    x = np.empty(n)
    y = np.empty(n)
    post = np.empty(n, dtype=bool)
    n_chunks = (n + CHUNK_SIZE - 1) // CHUNK_SIZE

    def run_chunk(k: int) -> None:
        lo = k * CHUNK_SIZE
        hi = min(n, lo + CHUNK_SIZE)
        rng = _chunk_stream(int(cfg.seed), k)
        mask = rng.random(hi - lo) < p_success
        pts_s = success.sample(int(mask.sum()), rng)
        if failure is not None:
            pts_f = failure.sample(int((~mask).sum()), rng)
        else:
            pts_f = np.empty((0, 2))
        block = np.empty((hi - lo, 2))
        block[mask] = pts_s
        block[~mask] = pts_f
        post[lo:hi] = mask
        x[lo:hi] = block[:, 0]
        y[lo:hi] = block[:, 1]

    workers = thread_count()
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_chunk, range(n_chunks)))
    else:
        for k in range(n_chunks):
            run_chunk(k)

    sign = np.where(post, 1.0, -1.0)
    table = TrialTable(
        trial_index=np.arange(n, dtype=np.int64),
        postselected=post,
        x=x,
        y=y,
        c=sign * x * y,
        metadata={
            "seed": int(cfg.seed),
            "p_postselect": p_success,
            "acceptance_rate": {
                "postselected": success.acceptance,
                "complement": failure.acceptance if failure is not None else None,
            },
            "grid_fallback": sorted(
                name
                for name, s in (("postselected", success), ("complement", failure))
                if s is not None and s.used_grid_fallback
            ),
        },
    )
    if cfg.noise is not None and (cfg.noise[0] > 0.0 or cfg.noise[1] > 0.0):
        table = apply_readout_noise(table, cfg.noise[0], cfg.noise[1], cfg.seed)
    return table


def estimate_cheshire(records) -> tuple[float, float]:
    """Sample mean of the signed products and its standard error.

    The mean estimates C = 2 C(E_f).  The standard error is the ddof-1
    sample standard deviation over sqrt(n) (0.0 for a single record).
    """
    c = records.c if isinstance(records, TrialTable) else np.array(
        [r.c for r in records], dtype=float
    )
    if c.size == 0:
        raise ValidationError("estimate_cheshire: no records")
    mean = float(np.mean(c))
    if c.size == 1:
        return mean, 0.0
    return mean, float(np.std(c, ddof=1) / math.sqrt(c.size))


def apply_readout_noise(
    records: TrialTable, nu_x: float, nu_y: float, seed: int
) -> TrialTable:
    """Add independent zero-mean Gaussian noise to the readouts.

    Recomputes the signed products; nu_x = nu_y = 0 returns the input
    unchanged.  The noise stream lives in its own counter block, so it
    never overlaps the trial streams for the same seed.
    """
    if nu_x < 0.0 or nu_y < 0.0:
        raise ValidationError("apply_readout_noise: noise stds must be nonnegative")
    if nu_x == 0.0 and nu_y == 0.0:
        return records
    rng = np.random.Generator(
        np.random.Philox(key=int(seed), counter=_NOISE_COUNTER_BLOCK)
    )
    n = len(records)
    x = records.x + nu_x * rng.standard_normal(n)
    y = records.y + nu_y * rng.standard_normal(n)
    sign = np.where(records.postselected, 1.0, -1.0)
    meta = dict(records.metadata)
    meta["readout_noise"] = (float(nu_x), float(nu_y))
    return TrialTable(
        trial_index=records.trial_index,
        postselected=records.postselected,
        x=x,
        y=y,
        c=sign * x * y,
        metadata=meta,
    )


def write_trials_csv(records: TrialTable, path) -> None:
    """Dump trials as CSV with the stable column set."""
    data = np.column_stack(
        [
            records.trial_index.astype(float),
            records.postselected.astype(float),
            records.x,
            records.y,
            records.c,
        ]
    )
    np.savetxt(
        path,
        data,
        delimiter=",",
        header="trial_index,postselected,x,y,c",
        comments="",
        fmt=["%d", "%d", "%.17g", "%.17g", "%.17g"],
    )
