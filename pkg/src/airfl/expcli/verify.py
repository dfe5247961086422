"""Oracle batteries behind ``airfl verify``.

Each check compares a production routine with an independent computation
(sampling plus local polishing, grids, Monte-Carlo simulation, an exact
reflection model, or a seed ensemble) and reports pass/fail with numbers.
"""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from airfl.airlink import (
    GradientStats,
    NoiseParams,
    RisMode,
    RisState,
    Transceiver,
    aircomp_round,
    approx_ris_output,
    exact_ris_output,
    gradient_statistics,
    link_mse,
)
from airfl.channel import ChannelSet, FadingParams, Geometry, draw_node_positions
from airfl.complexlin import sample_complex_gaussian
from airfl.fltrain import (
    Aggregation,
    ConvexityParams,
    DataShard,
    FlConfig,
    LinearModel,
    LossKind,
    Scenario,
    bound_trajectory,
    global_loss,
    least_squares_optimum,
    pool_shards,
    run_fl,
)
from airfl.optimizer import AoConfig, QcqpInstance, solve_qcqp_kkt, solve_transmit_coeffs


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


# --- QCQP ----------------------------------------------------------------------


def random_qcqp(n, rng, linear=None):
    """A PD-constrained instance whose budget is sometimes active, sometimes slack."""
    linear = bool(rng.integers(2)) if linear is None else linear
    x = sample_complex_gaussian(0, 1.0, rng, size=(n, n))
    y = sample_complex_gaussian(0, 1.0, rng, size=(n, n))
    a = x @ x.conj().T + 0.2 * np.eye(n)
    b = y @ y.conj().T + 0.1 * np.eye(n)
    v = sample_complex_gaussian(0, 1.0, rng, size=n)
    q = sample_complex_gaussian(0, 0.5, rng, size=n) if linear else np.zeros(n, complex)
    floor = -float(np.real(np.vdot(q, np.linalg.solve(b, q))))  # min of x^H B x + 2Re q^H x
    const = float(rng.uniform(0.0, 0.5))
    inst = QcqpInstance(a, b, v, q, const)
    free = inst.constraint(np.linalg.solve(a, v))
    lo = floor + const
    inst.budget = lo + float(rng.uniform(0.05, 1.5)) * (free - lo)
    return inst


def _to_real(x):
    return np.concatenate([x.real, x.imag])


def _to_complex(z):
    n = z.size // 2
    return z[:n] + 1j * z[n:]


def qcqp_sampling_oracle(inst, rng, samples=20000, polish=5):
    """Best objective over uniform samples of the feasible ellipsoid, then SLSQP-polished."""
    n = inst.size
    b = inst.b_mat
    center = -np.linalg.solve(b, inst.q)
    radius_sq = inst.budget - inst.const_term + float(np.real(np.vdot(inst.q, -center)))
    if radius_sq <= 0:
        raise ValueError("empty feasible set")
    # uniform points in the unit ball of C^n = R^{2n}, mapped through B^{-1/2}
    g = rng.standard_normal((samples, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.uniform(size=(samples, 1)) ** (1.0 / (2 * n))
    u = g[:, :n] + 1j * g[:, n:]
    w, vecs = np.linalg.eigh(b)
    inv_sqrt = vecs @ np.diag(w**-0.5) @ vecs.conj().T
    pts = center + np.sqrt(radius_sq) * (u @ inv_sqrt.T)
    obj = np.real(np.einsum("ki,ij,kj->k", pts.conj(), inst.a_mat, pts)) - 2 * np.real(pts.conj() @ inst.v)
    best = float(obj.min())

    def f(z):
        return inst.objective(_to_complex(z))

    def slack(z):
        return inst.budget - inst.constraint(_to_complex(z))

    for k in np.argsort(obj)[:polish]:
        res = scipy.optimize.minimize(
            f, _to_real(pts[k]), method="SLSQP", constraints=[{"type": "ineq", "fun": slack}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        if slack(res.x) >= -1e-10:
            best = min(best, float(res.fun))
    return best


def check_qcqp_oracle(num_instances=50, seed=0):
    rng = np.random.default_rng(seed)
    worst_gap, worst_cs, worst_feas = 0.0, 0.0, 0.0
    for k in range(num_instances):
        n = 1 + k % 3
        inst = random_qcqp(n, rng)
        sol = solve_qcqp_kkt(inst)
        oracle = qcqp_sampling_oracle(inst, rng)
        worst_gap = max(worst_gap, abs(sol.objective - oracle))
        worst_cs = max(worst_cs, abs(sol.lam * (sol.constraint - inst.budget)))
        worst_feas = max(worst_feas, (sol.constraint - inst.budget) / max(1.0, abs(inst.budget)))
    ok = worst_gap <= 1e-4 and worst_cs <= 1e-8 and worst_feas <= 1e-8
    return CheckResult(
        "qcqp-kkt-vs-sampling",
        ok,
        f"{num_instances} instances, max |f-f_oracle| = {worst_gap:.2e}, max |lam*(c-P)| = {worst_cs:.2e}",
    )


# --- transmit coefficients ------------------------------------------------------


def random_transmit_instance(rng, num_nodes=2):
    c = sample_complex_gaussian(0, 1.0, rng, size=num_nodes)
    t = rng.uniform(0.5, 2.0, num_nodes)
    p_node = rng.uniform(0.5, 2.0, num_nodes)
    rho = rng.uniform(0.1, 2.0, num_nodes)
    ris_noise = float(rng.uniform(0.0, 0.2))
    p_ris = ris_noise + float(rng.uniform(0.1, 1.2)) * float(rho @ p_node)
    return c, t, p_node, rho, p_ris, ris_noise


def _node_curve(c, t, radii, thetas):
    """min over the phase grid of |c r e^{jθ} − t|² for every radius."""
    vals = np.abs(c * radii[:, None] * np.exp(1j * thetas)[None, :] - t) ** 2
    return vals.min(axis=1)


def transmit_polar_grid_oracle(c, t, p_node, rho, budget, radii=1201, phases=1441, zoom=2):
    """Two-node polar grid search over (|b₁|, ∠b₁, |b₂|, ∠b₂), refined by zooming."""
    thetas = np.linspace(0.0, 2 * np.pi, phases)
    lo = np.zeros(2)
    hi = np.sqrt(p_node)
    best = np.inf
    for _ in range(zoom + 1):
        r1 = np.linspace(lo[0], hi[0], radii)
        r2 = np.linspace(lo[1], hi[1], radii)
        f1 = _node_curve(c[0], t[0], r1, thetas)
        f2 = _node_curve(c[1], t[1], r2, thetas)
        tot = f1[:, None] + f2[None, :]
        feasible = rho[0] * r1[:, None] ** 2 + rho[1] * r2[None, :] ** 2 <= budget
        tot = np.where(feasible, tot, np.inf)
        i, j = np.unravel_index(np.argmin(tot), tot.shape)
        best = min(best, float(tot[i, j]))
        step = np.array([r1[1] - r1[0], r2[1] - r2[0]])
        centre = np.array([r1[i], r2[j]])
        lo = np.maximum(centre - 3 * step, 0.0)
        hi = np.minimum(centre + 3 * step, np.sqrt(p_node))
    return best


def check_transmit_oracle(num_instances=50, seed=1):
    rng = np.random.default_rng(seed)
    worst_gap, worst_node, worst_ris = 0.0, -np.inf, -np.inf
    for _ in range(num_instances):
        c, t, p_node, rho, p_ris, ris_noise = random_transmit_instance(rng)
        m = np.array([1.0 + 0j])
        stats = GradientStats(np.zeros(2), t, np.ones(2))
        b = solve_transmit_coeffs(m, c[:, None], rho, stats, p_node, p_ris, ris_noise)
        obj = float(np.sum(np.abs(c * b - t) ** 2))
        oracle = transmit_polar_grid_oracle(c, t, p_node, rho, p_ris - ris_noise)
        worst_gap = max(worst_gap, abs(obj - oracle))
        worst_node = max(worst_node, float(np.max(np.abs(b) ** 2 - p_node)))
        worst_ris = max(worst_ris, float(rho @ np.abs(b) ** 2) + ris_noise - p_ris)
    ok = worst_gap <= 1e-3 and worst_node <= 1e-9 and worst_ris <= 1e-9
    return CheckResult(
        "transmit-dual-vs-polar-grid",
        ok,
        f"{num_instances} instances, max gap {worst_gap:.2e}, node excess {worst_node:.1e}, RIS excess {worst_ris:.1e}",
    )


# --- closed-form MSE ------------------------------------------------------------


def random_link(rng, num_antennas=4, num_elements=8, num_nodes=3, nu=1e-2):
    ch = ChannelSet(
        h_d=sample_complex_gaussian(0, 0.2, rng, size=(num_nodes, num_antennas)),
        h_r=sample_complex_gaussian(0, 1.0, rng, size=(num_nodes, num_elements)),
        g_mat=sample_complex_gaussian(0, 0.1, rng, size=(num_antennas, num_elements)),
        h_si=sample_complex_gaussian(0, nu**2, rng, size=(num_elements, num_elements)),
    )
    phi = rng.uniform(0.5, 2.0, num_elements) * np.exp(1j * rng.uniform(0, 2 * np.pi, num_elements))
    tx = Transceiver(
        m=sample_complex_gaussian(0, 1.0, rng, size=num_antennas),
        b=0.8 * np.exp(1j * rng.uniform(0, 2 * np.pi, num_nodes)),
        p_node=1.0,
    )
    stats = GradientStats(rng.normal(size=num_nodes), rng.uniform(0.5, 2.0, num_nodes), rng.integers(5, 20, num_nodes))
    return ch, RisState(phi, RisMode.ACTIVE), tx, stats


def empirical_mse(ch, ris, tx, stats, noise, rng, entries=10_000):
    """Mean |ŝ − s|² over simulated entries built from independent random gradients."""
    grads = rng.normal(size=(ch.num_nodes, 2 * entries))
    _, packed = gradient_statistics(grads, stats.sizes)
    s_hat = aircomp_round(packed, tx, ch, ris, noise, rng)
    s = stats.targets @ packed
    return float(np.mean(np.abs(s_hat - s) ** 2))


def check_mse_montecarlo(num_instances=10, seed=2, entries=10_000, rtol=0.03):
    rng = np.random.default_rng(seed)
    noise = NoiseParams(sigma_a_sq=0.05, sigma_e_sq=0.5)
    worst = 0.0
    for _ in range(num_instances):
        ch, ris, tx, stats = random_link(rng)
        closed = link_mse(tx, ch, ris, stats, noise)
        emp = empirical_mse(ch, ris, tx, stats, noise, rng, entries)
        worst = max(worst, abs(emp - closed) / closed)
    return CheckResult(
        "closed-form-mse-vs-montecarlo",
        worst <= rtol,
        f"{num_instances} instances x {entries} entries, max relative deviation {worst:.2%}",
    )


# --- RIS approximation ---------------------------------------------------------


def ris_approx_errors(nus=(1e-2, 1e-3, 1e-4), num_elements=8, seed=3, num_seeds=10):
    """Relative gap between the loop-exact and first-order RIS outputs, (seeds, len(nus))."""
    out = np.zeros((num_seeds, len(nus)))
    for s in range(num_seeds):
        rng = np.random.default_rng([seed, s])
        phi = rng.uniform(1.0, 2.0, num_elements) * np.exp(1j * rng.uniform(0, 2 * np.pi, num_elements))
        base = sample_complex_gaussian(0, 1.0, rng, size=(num_elements, num_elements))
        x_in = sample_complex_gaussian(0, 1.0, rng, size=num_elements)
        z_a = sample_complex_gaussian(0, 1e-2, rng, size=num_elements)
        ris = RisState(phi, RisMode.ACTIVE)
        for j, nu in enumerate(nus):
            exact = exact_ris_output(ris, nu * base, x_in, z_a)
            approx = approx_ris_output(ris, nu * base, x_in, z_a)
            out[s, j] = np.linalg.norm(exact - approx) / np.linalg.norm(exact)
    return out


def check_ris_approx(min_ratio=50.0):
    errs = ris_approx_errors()
    ratios = errs[:, :-1] / errs[:, 1:]
    return CheckResult(
        "ris-first-order-error-order",
        bool(np.all(ratios >= min_ratio)),
        f"error shrink per 10x drop in nu: min {ratios.min():.1f}, median {np.median(ratios):.1f}",
    )


# --- convergence bound --------------------------------------------------------


def least_squares_nodes(num_nodes=5, samples=100, features=10, seed=4, reg=0.01):
    """Heterogeneous regression shards: each node has its own feature offset."""
    rng = np.random.default_rng(seed)
    scales = np.linspace(0.4, 1.5, features)
    w_true = rng.normal(size=features)
    shards = []
    for _ in range(num_nodes):
        x = rng.normal(size=(samples, features)) * scales + 0.3 * rng.normal(size=features)
        y = x @ w_true + 0.1 * rng.normal(size=samples)
        shards.append(DataShard(x, np.zeros(samples, dtype=np.int64), y))
    pooled = pool_shards(shards)
    params = ConvexityParams.from_features(pooled.features, reg)
    w_star = least_squares_optimum(pooled.features, pooled.targets, reg)
    model = LinearModel.zeros(1, features, LossKind.LEAST_SQUARES, reg)
    l_star = global_loss(model.with_flat(w_star.reshape(-1)), shards)
    return shards, model, params, l_star


def bound_ensemble(arm="none", rounds=30, num_seeds=20, num_antennas=4, num_elements=16, ao_config=None):
    """Per-seed loss gaps and bounds, each of shape (num_seeds, rounds)."""
    shards, model, params, l_star = least_squares_nodes()
    ao_config = ao_config or AoConfig(outer_max_iters=10)
    gaps, bounds = [], []
    for s in range(num_seeds):
        rng = np.random.default_rng([s, 0])
        geom = Geometry((-50.0, 0.0, 10.0), (0.0, 0.0, 10.0), draw_node_positions(len(shards), ((0, 20), (-10, 10), 0), rng))
        sc = Scenario(
            shards=shards, model=model, geometry=geom, num_antennas=num_antennas, num_elements=num_elements,
            fading=FadingParams(),
        )
        fl = FlConfig(rounds=rounds, learning_rate=1.0 / params.rho, aggregation=Aggregation(arm))
        trace = run_fl(fl, sc, ao_config, rng=np.random.default_rng([s, 2]), channel_seed=s)
        gap0 = trace.initial_loss - l_star
        gaps.append(trace.losses - l_star)
        bounds.append(bound_trajectory(gap0, trace.error_sq, params))
    return np.array(gaps), np.array(bounds), params, gap0


def check_bound(num_seeds=20, rounds=30):
    gaps, bounds, params, _ = bound_ensemble("none", rounds, num_seeds)
    se = gaps.std(axis=0, ddof=1) / np.sqrt(num_seeds)
    mean_ok = bool(np.all(gaps.mean(axis=0) <= bounds.mean(axis=0) + 1e-12))
    violators = int(np.sum(np.any(gaps - bounds > 2 * se, axis=1)))
    ideal, _, _, gap0 = bound_ensemble("ideal", rounds, 1)
    seq = np.concatenate([[gap0], ideal[0]])
    live = seq[:-1] > 1e-12 * gap0
    ratios = seq[1:][live] / seq[:-1][live]
    ideal_ok = bool(np.all(ratios <= params.lambda_conv + 0.01))
    return [
        CheckResult(
            "loss-gap-below-bound",
            mean_ok and violators <= 1,
            f"{num_seeds} seeds x {rounds} rounds, mean gap <= mean bound: {mean_ok}, seed violations: {violators}",
        ),
        CheckResult(
            "ideal-decay-ratio",
            ideal_ok,
            f"max ratio {ratios.max():.4f} vs lambda + 0.01 = {params.lambda_conv + 0.01:.4f}",
        ),
    ]


SUITES = {
    "qcqp-oracle": lambda: [check_qcqp_oracle(), check_transmit_oracle()],
    "mse-montecarlo": lambda: [check_mse_montecarlo()],
    "bound-check": check_bound,
    "ris-approx": lambda: [check_ris_approx()],
}


def run_suite(name, out=print):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = SUITES[name]()
    for r in results:
        out(r.line())
    return 0 if all(r.passed for r in results) else 1

