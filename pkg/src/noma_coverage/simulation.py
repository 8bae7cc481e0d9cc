"""Monte Carlo ground truth: full network realizations and raw SIC events.

Randomness is organised in fixed blocks of ``BLOCK_SIZE`` trials.  Every
(master_seed, block, stream) triple keys its own Philox generator, so a
trial's realization depends only on the seed and its index, and block
results can be reduced in any worker order.

PPP networks are sampled exactly but lazily:

* The typical pair is two i.i.d. uniform points of the typical Voronoi cell
  (the law of a uniformly selected pair given at least two users).  They are
  drawn by rejection from a star-shaped envelope built from angular sectors.
* Other cells take the two lowest-priority users of a thinned user process;
  cells left with fewer than two are completed locally with the rest of
  the process, restricted to a disc known to contain the cell.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .coverage import ROLES, SCHEMES, CoverageEstimate, RankingScheme, UserRole
from .spatial import ConfigError, ModelConfig, ModelKind, OrderedDistancePair

BLOCK_SIZE = 2048
Z95 = 1.96

N_SECTORS = 16
K_NEAR = 32
# neighbours used for the sector envelope (any subset gives a valid bound)
K_ENVELOPE = 12
PROPOSALS_PER_ROUND = 8
# thinned user load (per BS) used before local completion of sparse cells
STAGE1_LOAD = 16.0


class Stream(enum.IntEnum):
    BS = 0
    TYPICAL = 1
    TYPICAL_FADING = 2
    USERS = 3
    INTERFERER_FADING = 4
    REJECTIONS = 5


def default_window(lambda_b: float) -> float:
    return 10.0 / math.sqrt(math.pi * lambda_b)


@dataclass(frozen=True)
class SimConfig:
    model: ModelConfig
    trials: int = 100_000
    master_seed: int = 1
    t_grid: tuple = (1.0,)
    window_radius: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.window_radius is None:
            object.__setattr__(self, "window_radius", default_window(self.model.lambda_b))
        if not self.window_radius >= default_window(self.model.lambda_b) * (1 - 1e-12):
            raise ConfigError(
                f"window_radius {self.window_radius} < 10/sqrt(pi lambda_b) = "
                f"{default_window(self.model.lambda_b):.6g}"
            )
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        t = tuple(float(v) for v in np.atleast_1d(self.t_grid))
        if not t or any(not v > 0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("t_grid must be nonempty, positive and strictly increasing")
        object.__setattr__(self, "t_grid", t)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def n_blocks(self) -> int:
        return -(-int(self.trials) // BLOCK_SIZE)


def block_rng(master_seed: int, block: int, stream: Stream) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(block), int(stream)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class NetworkRealization:
    """One sampled network seen from the typical BS at the origin."""

    typical_pair: OrderedDistancePair
    h1: float
    h2: float
    interferer_distances: np.ndarray
    interferer_fading: np.ndarray
    bs_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    interferer_points: np.ndarray | None = None
    rejections: int = 0

    def interference(self, alpha: float) -> float:
        return float(np.sum(self.interferer_fading * self.interferer_distances ** (-alpha)))


@dataclass
class Block:
    """Vectorized realizations for trials ``first .. first + size - 1``."""

    first: int
    r1: np.ndarray
    r2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    bs_rho: np.ndarray
    bs_phi: np.ndarray
    bs_count: np.ndarray
    # interferers, flattened in trial order
    offsets: np.ndarray | None = None
    int_xy: np.ndarray | None = None
    int_fading: np.ndarray | None = None
    rejections: np.ndarray | None = None

    def interference(self, alpha: float) -> np.ndarray:
        d2 = np.einsum("ij,ij->i", self.int_xy, self.int_xy)
        terms = self.int_fading * d2 ** (-alpha / 2.0)
        owner = np.repeat(np.arange(self.r1.size), np.diff(self.offsets))
        return np.bincount(owner, weights=terms, minlength=self.r1.size)


# -- geometry helpers --------------------------------------------------------

def _base_stations(cfg: SimConfig, rng, size: int):
    """Other BSs in the window, sorted by distance (PPP via unit-rate arrivals)."""
    lam = cfg.model.lambda_b
    mean = lam * math.pi * cfg.window_radius**2
    kmax = int(math.ceil(mean + 10.0 * math.sqrt(mean) + 20.0))
    gamma = np.cumsum(rng.standard_exponential((size, kmax)), axis=1)
    phi = rng.uniform(0.0, 2.0 * math.pi, (size, kmax))
    if np.any(gamma[:, -1] <= mean):
        raise RuntimeError("BS buffer exhausted; increase the radial buffer size")
    count = np.sum(gamma <= mean, axis=1)
    rho = np.sqrt(gamma / (lam * math.pi))
    return rho, phi, count


def _circ_dist(a, b):
    d = np.abs(a - b) % (2.0 * math.pi)
    return np.minimum(d, 2.0 * math.pi - d)


def sector_radii(rho, phi, valid, n_sectors=N_SECTORS, cap=np.inf):
    """Per-sector bound on the radial extent of a Voronoi cell at the origin.

    For directions within ``Delta < pi/2`` of a neighbour at (rho, phi) the
    cell boundary is no farther than ``rho / (2 cos Delta)``.  Leading
    dimensions of the inputs are kept; the last one indexes neighbours.
    """
    w = 2.0 * math.pi / n_sectors
    edges = w * np.arange(n_sectors + 1)
    ce, se = np.cos(edges)[:, None], np.sin(edges)[:, None]
    cp, sp = np.cos(phi)[..., None, :], np.sin(phi)[..., None, :]
    c_edge = cp * ce + sp * se  # cos of the angle to each sector edge
    # cos is decreasing on [0, pi]: the farther edge gives cos(Delta)
    cosd = np.minimum(c_edge[..., :-1, :], c_edge[..., 1:, :])
    ok = (cosd > 0.0) & valid[..., None, :]
    bound = np.where(ok, rho[..., None, :] / (2.0 * np.where(ok, cosd, 1.0)), np.inf)
    return np.minimum(bound.min(axis=-1), cap)


def window_sector_reach(bx, by, window, n_sectors=N_SECTORS):
    """Per-sector distance from (bx, by) to the farthest window point in that sector.

    Along direction u the window disc ends at ``t = m + sqrt(m^2 + W^2 - |b|^2)``
    with ``m = -b.u``, largest for the direction closest to ``-b``.
    """
    w = 2.0 * math.pi / n_sectors
    edges = w * np.arange(n_sectors)
    rb = math.hypot(bx, by)
    toward = math.atan2(-by, -bx) % (2.0 * math.pi)
    inside = ((toward - edges) % (2.0 * math.pi)) <= w
    gap = np.where(inside, 0.0, np.minimum(_circ_dist(toward, edges),
                                           _circ_dist(toward, edges + w)))
    m = rb * np.cos(np.minimum(gap, math.pi))
    return m + np.sqrt(np.maximum(m * m + window * window - rb * rb, 0.0))


def _in_typical_cell(zx, zy, bx, by, valid):
    """z in the cell of the origin: 2 z.b <= |b|^2 for every other BS b."""
    lhs = 2.0 * (zx[..., None] * bx[..., None, :] + zy[..., None] * by[..., None, :])
    rhs = (bx * bx + by * by)[..., None, :]
    return np.all((lhs <= rhs) | ~valid[..., None, :], axis=-1)


def _typical_pairs_ppp(cfg: SimConfig, rho, phi, count, rng):
    """Two i.i.d. uniform points in each trial's typical cell (rejection sampling)."""
    size = rho.shape[0]
    W = cfg.window_radius
    k = min(K_NEAR, rho.shape[1])
    col = np.arange(rho.shape[1])
    valid_all = col[None, :] < count[:, None]
    near_rho, near_phi, near_valid = rho[:, :k], phi[:, :k], valid_all[:, :k]
    ke = min(K_ENVELOPE, k)
    radii = sector_radii(near_rho[:, :ke], near_phi[:, :ke], near_valid[:, :ke], cap=W)
    weights = radii**2
    cum = np.cumsum(weights, axis=1)
    cum /= cum[:, -1:]
    bx, by = near_rho * np.cos(near_phi), near_rho * np.sin(near_phi)
    # farther BSs cannot beat the origin for |z| < rho_k / 2
    safe_radius = np.where(count > k, rho[:, k - 1] / 2.0, np.inf)

    w = 2.0 * math.pi / N_SECTORS
    got = np.zeros((size, 2, 2))
    n_got = np.zeros(size, dtype=int)
    active = np.arange(size)
    while active.size:
        u = rng.random((active.size, PROPOSALS_PER_ROUND, 3))
        sec = np.minimum((u[..., 0, None] > cum[active][:, None, :]).sum(-1), N_SECTORS - 1)
        theta = w * (sec + u[..., 1])
        r = radii[active][np.arange(active.size)[:, None], sec] * np.sqrt(u[..., 2])
        zx, zy = r * np.cos(theta), r * np.sin(theta)
        inside = _in_typical_cell(zx, zy, bx[active], by[active], near_valid[active])
        unsafe = r > safe_radius[active][:, None]
        if np.any(unsafe & inside):
            rows, cols = np.nonzero(unsafe & inside)
            ta = active[rows]
            inside[rows, cols] = _in_typical_cell(
                zx[rows, cols][:, None], zy[rows, cols][:, None],
                rho[ta] * np.cos(phi[ta]), rho[ta] * np.sin(phi[ta]), valid_all[ta],
            )[:, 0]
        inside &= r <= W
        for i in range(PROPOSALS_PER_ROUND):
            take = inside[:, i] & (n_got[active] < 2)
            rows = active[take]
            got[rows, n_got[rows], 0] = zx[take, i]
            got[rows, n_got[rows], 1] = zy[take, i]
            n_got[rows] += 1
        active = active[n_got[active] < 2]
    d = np.hypot(got[..., 0], got[..., 1])
    return np.sort(d, axis=1), got


def typical_cell_area(bx, by):
    """Area of the Voronoi cell of the origin given the other BS positions."""
    d2 = bx * bx + by * by
    q = np.column_stack([2.0 * bx / d2, 2.0 * by / d2])
    hull = ConvexHull(q)
    v = q[hull.vertices]  # counter-clockwise
    nxt = np.roll(v, -1, axis=0)
    det = v[:, 0] * nxt[:, 1] - v[:, 1] * nxt[:, 0]
    # cell vertex solving z.q_i = 1, z.q_j = 1
    zx = (nxt[:, 1] - v[:, 1]) / det
    zy = (v[:, 0] - nxt[:, 0]) / det
    return 0.5 * abs(np.sum(zx * np.roll(zy, -1) - np.roll(zx, -1) * zy))


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    t = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def _ppp_interferers(cfg: SimConfig, bs_xy, rng):
    """Selected users of every non-typical cell (two, or all if fewer)."""
    model = cfg.model
    W = cfg.window_radius
    n_bs = bs_xy.shape[0]  # row 0 is the typical BS
    lam1 = min(model.lambda_u, STAGE1_LOAD * model.lambda_b)
    lam2 = model.lambda_u - lam1
    tree = cKDTree(bs_xy)

    users = _uniform_disc(rng, rng.poisson(lam1 * math.pi * W * W), W)
    owner = tree.query(users)[1] if users.size else np.zeros(0, dtype=int)
    order = np.argsort(owner, kind="stable")
    counts = np.bincount(owner, minlength=n_bs)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    chosen = []
    two = np.flatnonzero(counts >= 2)
    two = two[two != 0]
    firsts = order[np.concatenate([starts[two], starts[two] + 1])]
    chosen.append(users[np.sort(firsts)])

    sparse = np.flatnonzero(counts < 2)
    sparse = sparse[sparse != 0]
    if lam2 > 0:
        k = min(n_bs, K_NEAR + 1)
        for c in sparse:
            have = users[order[starts[c]:starts[c] + counts[c]]]
            nb_d, nb_i = tree.query(bs_xy[c], k=k)
            rel = bs_xy[nb_i[1:]] - bs_xy[c]
            radii = sector_radii(np.hypot(rel[:, 0], rel[:, 1]),
                                 np.arctan2(rel[:, 1], rel[:, 0]) % (2.0 * math.pi),
                                 np.ones(rel.shape[0], dtype=bool))
            radii = np.minimum(radii, window_sector_reach(bs_xy[c, 0], bs_xy[c, 1], W))
            reach = radii.max()
            extra = bs_xy[c] + _uniform_disc(rng, rng.poisson(lam2 * math.pi * reach**2), reach)
            extra = extra[np.einsum("ij,ij->i", extra, extra) <= W * W]
            if extra.size:
                extra = extra[tree.query(extra)[1] == c]
            chosen.append(np.concatenate([have, extra])[:2])
    else:
        for c in sparse:
            chosen.append(users[order[starts[c]:starts[c] + counts[c]]])
    return np.concatenate(chosen) if chosen else np.zeros((0, 2))


def _mcp_offspring(cfg: SimConfig, rho, phi, count, rng):
    size, kmax = rho.shape
    R = cfg.model.R
    u = rng.random((size, kmax, 2, 2))
    r = R * np.sqrt(u[..., 0])
    t = 2.0 * math.pi * u[..., 1]
    x = (rho * np.cos(phi))[..., None] + r * np.cos(t)
    y = (rho * np.sin(phi))[..., None] + r * np.sin(t)
    mask = np.broadcast_to((np.arange(kmax)[None, :] < count[:, None])[..., None], x.shape)
    xy = np.column_stack([x[mask], y[mask]])
    offsets = np.concatenate([[0], np.cumsum(2 * count)])
    return xy, offsets


def sample_block(cfg: SimConfig, block: int, interferers: bool = True,
                 force_equal: bool = False) -> Block:
    """Realizations of one RNG block; ``interferers=False`` samples the typical pair only."""
    seed = cfg.master_seed
    size = BLOCK_SIZE
    model = cfg.model
    if model.kind is ModelKind.MCP and not interferers:
        # the cluster pair does not depend on the other BSs
        rho = phi = np.zeros((size, 0))
        count = np.zeros(size, dtype=int)
    else:
        rho, phi, count = _base_stations(cfg, block_rng(seed, block, Stream.BS), size)
    trng = block_rng(seed, block, Stream.TYPICAL)
    if model.kind is ModelKind.MCP:
        d = np.sort(model.R * np.sqrt(trng.random((size, 2))), axis=1)
    else:
        d, _ = _typical_pairs_ppp(cfg, rho, phi, count, trng)
    r1, r2 = d[:, 0], d[:, 1]
    if force_equal:
        r1 = r2
    h = block_rng(seed, block, Stream.TYPICAL_FADING).standard_exponential((size, 2))
    out = Block(block * size, r1, r2, h[:, 0], h[:, 1], rho, phi, count)
    if not interferers:
        return out

    urng = block_rng(seed, block, Stream.USERS)
    if model.kind is ModelKind.MCP:
        xy, offsets = _mcp_offspring(cfg, rho, phi, count, urng)
        rejections = np.zeros(size, dtype=np.int64)
    else:
        parts, lengths = [], []
        rejections = np.zeros(size, dtype=np.int64)
        rrng = block_rng(seed, block, Stream.REJECTIONS)
        for i in range(size):
            n = count[i]
            bx, by = rho[i, :n] * np.cos(phi[i, :n]), rho[i, :n] * np.sin(phi[i, :n])
            bs_xy = np.column_stack([np.concatenate([[0.0], bx]), np.concatenate([[0.0], by])])
            sel = _ppp_interferers(cfg, bs_xy, urng)
            parts.append(sel)
            lengths.append(sel.shape[0])
            mu = model.lambda_u * typical_cell_area(bx, by)
            p_fail = math.exp(-mu) * (1.0 + mu)
            rejections[i] = rrng.geometric(1.0 - p_fail) - 1
        xy = np.concatenate(parts)
        offsets = np.concatenate([[0], np.cumsum(lengths)])
    out.offsets = offsets
    out.int_xy = xy
    out.int_fading = block_rng(seed, block, Stream.INTERFERER_FADING).standard_exponential(
        xy.shape[0])
    out.rejections = rejections
    return out


def sample_network(cfg: SimConfig, trial_index: int) -> NetworkRealization:
    """The realization used by trial ``trial_index`` (regenerates its block)."""
    if not 0 <= trial_index:
        raise ValueError("trial_index must be >= 0")
    block, k = divmod(int(trial_index), BLOCK_SIZE)
    b = sample_block(cfg, block)
    lo, hi = b.offsets[k], b.offsets[k + 1]
    xy = b.int_xy[lo:hi]
    n = b.bs_count[k]
    bs = np.column_stack([b.bs_rho[k, :n] * np.cos(b.bs_phi[k, :n]),
                          b.bs_rho[k, :n] * np.sin(b.bs_phi[k, :n])])
    return NetworkRealization(
        OrderedDistancePair(float(b.r1[k]), float(b.r2[k])),
        float(b.h1[k]), float(b.h2[k]),
        np.hypot(xy[:, 0], xy[:, 1]), b.int_fading[lo:hi].copy(),
        bs_points=bs, interferer_points=xy.copy(), rejections=int(b.rejections[k]),
    )


# -- events ------------------------------------------------------------------

def decode_events(s1, s2, interference, t_grid):
    """Raw success indicators, shape ``(scheme, role, T, ...)``.

    ``s1``/``s2`` are received powers of the near/far user.  Zero
    interference makes single-user SIRs infinite (the product forms below
    never divide).
    """
    s1, s2, i = (np.asarray(v, dtype=float)[None, ...] for v in (s1, s2, interference))
    T = np.asarray(t_grid, dtype=float).reshape((-1,) + (1,) * (s1.ndim - 1))
    near_strong = s1 > s2
    far_strong = s1 < s2
    near_first = s1 > T * (s2 + i)
    far_first = s2 > T * (s1 + i)
    near_alone = s1 > T * i
    far_alone = s2 > T * i

    isp_near = (near_first & near_strong) | (far_first & near_alone & far_strong)
    isp_far = (far_first & far_strong) | (near_first & far_alone & near_strong)
    msp_near = near_first
    msp_far = near_first & far_alone
    return np.stack([
        np.stack([isp_near, isp_far]),
        np.stack([msp_near, msp_far]),
        np.stack([msp_near & near_strong, msp_far & near_strong]),
    ])


def evaluate_events(real: NetworkRealization, alpha: float, t_grid):
    """Per (scheme, role, T) outcome for one realization."""
    p = real.typical_pair
    s1 = real.h1 * p.r1 ** (-alpha) if p.r1 > 0 else math.inf
    s2 = real.h2 * p.r2 ** (-alpha)
    return decode_events(s1, s2, real.interference(alpha), t_grid)


def _block_counts(cfg: SimConfig, block: int):
    b = sample_block(cfg, block)
    n = min(BLOCK_SIZE, cfg.trials - block * BLOCK_SIZE)
    alpha = cfg.model.alpha
    interference = b.interference(alpha)[:n]
    with np.errstate(divide="ignore"):
        s1 = b.h1[:n] * b.r1[:n] ** (-alpha)
    s2 = b.h2[:n] * b.r2[:n] ** (-alpha)
    ev = decode_events(s1, s2, interference, cfg.t_grid)
    return ev.sum(axis=-1, dtype=np.int64), int(b.rejections[:n].sum()), n


def _run_blocks(cfg: SimConfig, fn):
    blocks = range(cfg.n_blocks)
    if cfg.workers == 1:
        return [fn(cfg, k) for k in blocks]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda k: fn(cfg, k), blocks))


@dataclass
class SimulationResult:
    counts: np.ndarray  # (scheme, role, T) success counts
    trials: int
    seed: int
    t_grid: tuple
    rejections: int = 0

    def estimate(self, scheme, role, k: int) -> CoverageEstimate:
        i = SCHEMES.index(RankingScheme(scheme))
        j = ROLES.index(UserRole(role))
        return estimate_from_count(int(self.counts[i, j, k]), self.trials, self.seed)

    @property
    def values(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.values
        return np.sqrt(p * (1.0 - p) / self.trials)


def estimate_from_count(successes: int, trials: int, seed=None) -> CoverageEstimate:
    p = successes / trials
    return CoverageEstimate(p, "MC", ci_halfwidth=Z95 * math.sqrt(p * (1.0 - p) / trials),
                            trials=trials, seed=seed)


def simulate(cfg: SimConfig) -> SimulationResult:
    """Success counts for every scheme, role and threshold on common random numbers."""
    parts = _run_blocks(cfg, _block_counts)
    counts = np.zeros((len(SCHEMES), len(ROLES), len(cfg.t_grid)), dtype=np.int64)
    rejections = 0
    for c, rej, _ in parts:  # fixed block order
        counts += c
        rejections += rej
    return SimulationResult(counts, int(cfg.trials), int(cfg.master_seed), cfg.t_grid, rejections)


def estimate_coverage(cfg: SimConfig, scheme, role) -> list[CoverageEstimate]:
    res = simulate(cfg)
    return [res.estimate(scheme, role, k) for k in range(len(cfg.t_grid))]


def estimate_ordering_probability(cfg: SimConfig, force_equal: bool = False) -> CoverageEstimate:
    """Fraction of trials whose near user also has the larger instantaneous power."""
    alpha = cfg.model.alpha

    def run(c, k):
        b = sample_block(c, k, interferers=False, force_equal=force_equal)
        n = min(BLOCK_SIZE, c.trials - k * BLOCK_SIZE)
        with np.errstate(divide="ignore"):
            s1 = b.h1[:n] * b.r1[:n] ** (-alpha)
        s2 = b.h2[:n] * b.r2[:n] ** (-alpha)
        return int(np.count_nonzero(s1 > s2))

    wins = sum(_run_blocks(cfg, run))
    return estimate_from_count(wins, int(cfg.trials), int(cfg.master_seed))


def fading_oracle(pair: OrderedDistancePair, alpha: float, T: float, i_const: float,
                  draws: int = 1_000_000, seed: int = 0):
    """Brute-force conditional coverage with deterministic interference.

    Returns ``(probabilities, standard_errors)``, each ``[scheme, role]``.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if not i_const >= 0:
        raise ValueError("interference level must be >= 0")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    h = rng.standard_exponential((2, int(draws)))
    with np.errstate(divide="ignore"):
        s1 = h[0] * pair.r1 ** (-alpha)
    s2 = h[1] * pair.r2 ** (-alpha)
    ev = decode_events(s1, s2, i_const, [T])[:, :, 0]
    p = ev.mean(axis=-1)
    return p, np.sqrt(p * (1.0 - p) / draws)
