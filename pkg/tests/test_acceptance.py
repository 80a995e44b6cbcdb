"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
pass/fail line per criterion.
"""

import json
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
import yaml

from loadgan.autodiff import BatchNormLayer, DenseLayer, DropoutLayer, Value
from loadgan.autodiff.gradcheck import numerical_gradient, relative_error
from loadgan.cli import main, read_profiles
from loadgan.gan import (DiscriminatorModel, GeneratorModel, discriminator_loss, generator_loss,
                         sample_profiles)
from loadgan.metrics import realism_stats
from loadgan.qp import jacobian, oracle_project, project, qp_backward

from _util import paper_polytope, random_inputs, random_polytope, stable_active_set

ROOT = Path(__file__).resolve().parents[1]
FEAS_TOL = 1e-8


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# -- 1 ------------------------------------------------------------------------

@criterion(1, "QP oracle equivalence (m = 2, 3, 4; 1000 inputs each)")
def test_qp_oracle_equivalence(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(100)
    worst = 0.0
    for m in (2, 3, 4):
        for _ in range(100):                 # 100 polytopes x 10 inputs
            poly = random_polytope(rng, m)
            a = random_inputs(rng, poly, 10)
            err = np.abs(project(a, poly).z_star - oracle_project(a, poly)).max()
            worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max |project - oracle| = {worst:.2e} (< 1e-6), {elapsed:.1f} s")
    assert worst < 1e-6
    assert elapsed < 60


# -- 2 ------------------------------------------------------------------------

@criterion(2, "QP gradient check vs central differences (200 stable instances, m = 15)")
def test_qp_gradient_check(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(200)
    P = paper_polytope()
    A = []
    while len(A) < 200:
        for a in random_inputs(rng, P, 200):
            if stable_active_set(project(a, P)) and len(A) < 200:
                A.append(a)
    A = np.array(A)
    G = rng.normal(size=A.shape)
    sol = project(A, P)
    analytic = qp_backward(sol, P, G)
    h = 1e-6
    numeric = np.empty_like(A)
    for i in range(P.m):
        e = np.zeros(P.m)
        e[i] = h
        up = np.einsum("bi,bi->b", G, project(A + e, P).z_star)
        dn = np.einsum("bi,bi->b", G, project(A - e, P).z_star)
        numeric[:, i] = (up - dn) / (2 * h)
    errs = [relative_error(analytic[b], numeric[b]) for b in range(len(A))]
    elapsed = time.perf_counter() - t0
    n_active = int(sol.active_mask.any(axis=1).sum())
    record_property("detail", f"max relative error = {max(errs):.2e} (< 1e-4), "
                              f"{n_active}/200 with active rows, {elapsed:.1f} s")
    assert max(errs) < 1e-4
    assert n_active > 100
    assert elapsed < 60


# -- 3 ------------------------------------------------------------------------

def _interior_points(rng, P, n):
    """Strictly interior windows: every box and ramp row has slack > 0.05."""
    out = []
    while len(out) < n:
        c = rng.uniform(P.lower + 1.0, P.upper - 1.0)
        z = c * np.cumprod(np.r_[1.0, 1.0 + rng.uniform(-0.3, 0.3, P.m - 1)])
        if P.slack(z).min() > 0.05:
            out.append(z)
    return np.array(out)


@criterion(3, "Projection properties (idempotence, non-expansiveness, fixed points, Jacobians)")
def test_projection_properties(record_property):
    rng = np.random.default_rng(300)
    P = paper_polytope()
    a = random_inputs(rng, P, 1000)
    b = random_inputs(rng, P, 1000)
    za, zb = project(a, P).z_star, project(b, P).z_star
    idem = np.abs(project(za, P).z_star - za).max()
    expansion = (np.linalg.norm(za - zb, axis=1) - np.linalg.norm(a - b, axis=1)).max()

    feas = _interior_points(rng, P, 1000)
    fixed = np.abs(project(feas, P).z_star - feas).max()
    sol = project(feas, P)
    jac_id = max(np.abs(J - np.eye(P.m)).max() for J in jacobian(sol, P))

    above = P.upper + rng.uniform(0.5, 5.0, (1000, P.m))    # every coordinate clamped at the top
    sol_c = project(above, P)
    jac_zero = max(np.abs(J).max() for J in jacobian(sol_c, P))
    record_property("detail", f"idempotence {idem:.1e}, max expansion {expansion:.1e}, "
                              f"fixed point {fixed:.1e}, |J - I| {jac_id:.1e}, |J_clamped| {jac_zero:.1e}")
    assert idem <= 1e-8
    assert expansion <= 1e-9
    assert fixed <= 1e-8
    assert jac_id <= 1e-10
    assert np.allclose(sol_c.z_star, P.upper, atol=1e-9, rtol=0)
    assert jac_zero <= 1e-10


# -- 4 ------------------------------------------------------------------------

@criterion(4, "Table I hard constraints: 500 profiles, <= 50% change, <= 10.2582 kW, zero violations")
def test_table_one_hard_constraints(record_property):
    t0 = time.perf_counter()
    P = paper_polytope(15)
    assert P.upper == pytest.approx(10.2582)
    worst_change, worst_peak, total_viol, worst_excess = 0.0, 0.0, 0, -np.inf
    for seed in range(20):
        rng = np.random.default_rng(seed)
        gen = GeneratorModel(P, seed=seed)
        # random parameter draws at several scales, beyond anything training produces
        scale = 10.0 ** rng.uniform(-1, 2)
        for p in gen.parameters():
            p.data[...] = rng.normal(0.0, scale, p.data.shape)
        prof = sample_profiles(gen, 500, seed=seed)
        stats = realism_stats(prof, window=15)
        worst_change = max(worst_change, stats.max_change_pct)
        # raw ramp rows hold to feas_tol, which allows 100*feas_tol/z_prev percent on top
        prev, cur = prof[:, :-1], prof[:, 1:]
        ok = prev > 1e-6
        excess = 100 * np.abs(cur - prev)[ok] / prev[ok] - 50.0 - 100 * FEAS_TOL / prev[ok]
        worst_excess = max(worst_excess, excess.max())
        worst_peak = max(worst_peak, stats.max_injection_kw)
        total_viol += sum(P.violations(prof, tol=FEAS_TOL).values())
    elapsed = time.perf_counter() - t0
    record_property("detail", f"20 untrained generators x 500 profiles: max change "
                              f"{worst_change:.6f}% (<= 50 + feas_tol slack), max injection {worst_peak:.6f} kW, "
                              f"{total_viol} violations, {elapsed:.0f} s")
    assert total_viol == 0
    assert worst_excess <= 1e-9
    assert worst_change <= 50.0 + 1e-4
    assert worst_peak <= 1.39 * 7.38 + FEAS_TOL
    assert elapsed < 300


# -- 5 ------------------------------------------------------------------------

def _fd(build_loss, params, h=1e-5):
    loss = build_loss()
    for p in params:
        p.zero_grad()
    loss.backward()
    analytic, numeric = [], []
    for p in params:
        def f(v, p=p):
            saved = p.data.copy()
            p.data[...] = v
            try:
                return float(build_loss().data)
            finally:
                p.data[...] = saved
        analytic.append(p.grad.ravel().copy())
        numeric.append(numerical_gradient(f, p.data.copy(), h).ravel())
    return relative_error(np.concatenate(analytic), np.concatenate(numeric))


@criterion(5, "Autodiff finite-difference checks (layers 1e-4, end-to-end 1e-3)")
def test_autodiff_correctness(record_property):
    rng = np.random.default_rng(500)
    x = rng.normal(size=(6, 3))
    target = rng.normal(size=(6, 4))
    layer_errs = {}
    for act in ("linear", "leaky-relu", "sigmoid"):
        dense = DenseLayer(3, 4, act, rng)
        xv = Value(x.copy(), requires_grad=True)
        layer_errs[f"dense-{act}"] = _fd(lambda: ((dense(xv) - target) ** 2).mean(),
                                         dense.parameters() + [xv])
    norm = BatchNormLayer(4)
    norm.gamma.data[:] = rng.uniform(0.5, 1.5, 4)
    norm.beta.data[:] = rng.normal(size=4)
    xb = Value(rng.normal(size=(6, 4)), requires_grad=True)
    layer_errs["batchnorm"] = _fd(lambda: ((norm(xb) - target) ** 2).mean(), norm.parameters() + [xb])
    drop = DropoutLayer(0.3, rng_seed=1)
    xd = Value(rng.normal(size=(6, 4)), requires_grad=True)
    # one fixed mask: rewind the step counter before every evaluation
    def dropped():
        drop.step = 0
        return ((drop(xd) - target) ** 2).mean()
    layer_errs["dropout"] = _fd(dropped, [xd])

    # end to end: generator loss through D, aggregation and the QP layer
    disc = DiscriminatorModel(seed=1, hidden=(16, 16))
    disc.eval()
    e2e = []
    for seed in range(60):
        gen = GeneratorModel(paper_polytope(), hidden=(16, 16), seed=seed)
        gen.head.weight.data *= 20.0
        gen.eval()
        noise = gen.sample_noise(np.random.default_rng(seed), 4)
        a = gen.head_output(noise).data
        sols = [project(row, gen.polytope) for row in a]
        if not all(stable_active_set(s) for s in sols) or not any(s.active_mask.any() for s in sols):
            continue
        params = gen.parameters()
        e2e.append(_fd(lambda: generator_loss(disc(gen(noise)[1])), params, h=1e-6))
        if len(e2e) == 3:
            break
    worst_layer = max(layer_errs.values())
    record_property("detail", f"worst layer error {worst_layer:.1e} "
                              f"({max(layer_errs, key=layer_errs.get)}), end-to-end "
                              f"{max(e2e):.1e} over {len(e2e)} stable points with active rows")
    assert worst_layer < 1e-4
    assert len(e2e) == 3 and max(e2e) < 1e-3


# -- 6, 7, 8: one desk-scale pipeline through the CLI ------------------------

@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    """synth (60 days) -> train constrained + baseline -> generate 500 -> validate each."""
    tmp = tmp_path_factory.mktemp("desk")
    doc = yaml.safe_load((ROOT / "configs" / "desk_scale.yaml").read_text())
    doc["out_dir"] = str(tmp)
    doc["data"].update(fast_csv=str(tmp / "fast.csv"), slow_csv=str(tmp / "slow.csv"))
    cfg = tmp / "run.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    t0 = time.perf_counter()
    assert main(["synth", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg), "--baseline"]) == 0
    run = {"doc": doc, "codes": {}, "reports": {}, "meta": {}, "profiles": {}}
    for kind in ("constrained", "baseline"):
        assert main(["generate", "--config", str(cfg), "--checkpoint", str(tmp / kind)]) == 0
        prof = tmp / f"profiles_{kind}.csv"
        run["codes"][kind] = main(["validate", "--config", str(cfg), "--profiles", str(prof)])
        run["reports"][kind] = json.loads((tmp / f"validate_profiles_{kind}" / "report.json").read_text())
        run["meta"][kind] = json.loads((tmp / kind / "meta.json").read_text())
        run["profiles"][kind] = read_profiles(prof)
    run["elapsed"] = time.perf_counter() - t0
    return run


@criterion(6, "Desk-scale training: KS(generated, held-out) < 0.15")
def test_desk_scale_training(desk_run, record_property):
    rep, doc = desk_run["reports"]["constrained"], desk_run["doc"]
    steps = desk_run["meta"]["constrained"]["steps"]
    record_property("detail", f"KS = {rep['ks_distance']:.4f} (< 0.15) after {steps} steps, "
                              f"{rep['total_violations']} violations, pipeline {desk_run['elapsed'] / 60:.1f} min")
    assert doc["synth"]["n_days"] == 60 and steps == doc["training"]["total_steps"] <= 20_000
    assert desk_run["profiles"]["constrained"].shape == (500, 15)
    assert rep["ks_distance"] < 0.15
    assert rep["total_violations"] == 0
    assert desk_run["codes"]["constrained"] == 0
    assert desk_run["elapsed"] < 30 * 60


@criterion(7, "Baseline contrast: >= 1 violation in 500 profiles, KS < 0.15")
def test_baseline_contrast(desk_run, record_property):
    rep = desk_run["reports"]["baseline"]
    gen = rep["generated"]
    record_property("detail", f"KS = {rep['ks_distance']:.4f} (< 0.15), {rep['total_violations']} "
                              f"violations {rep['violations']}, max change {gen['max_change_pct']:.0f}%, "
                              f"max injection {gen['max_injection_kw']:.2f} kW")
    assert desk_run["meta"]["baseline"]["config"]["training"] == desk_run["meta"]["constrained"]["config"]["training"]
    assert desk_run["profiles"]["baseline"].shape == (500, 15)
    assert rep["total_violations"] >= 1
    assert rep["ks_distance"] < 0.15
    # zero violations is a configured threshold, so the baseline fails validation
    assert desk_run["codes"]["baseline"] == 1


@criterion(8, "Convergence diagnostic: mean D(real), D(fake) in 0.5 +/- 0.15 (soft)")
def test_convergence_diagnostic(desk_run, record_property):
    meta = desk_run["meta"]["constrained"]
    d_real, d_fake = meta["d_real_mean_tail"], meta["d_fake_mean_tail"]
    record_property("detail", f"last-100-step means D(real) = {d_real:.3f}, D(fake) = {d_fake:.3f}")
    assert np.isfinite(d_real) and np.isfinite(d_fake)
    off = [name for name, v in (("D(real)", d_real), ("D(fake)", d_fake)) if abs(v - 0.5) > 0.15]
    if off:
        record_property("soft_warning", True)
        warnings.warn(f"discriminator not near equilibrium: {', '.join(off)} outside 0.5 +/- 0.15")


# -- 9 ------------------------------------------------------------------------

@criterion(9, "Loss unit values")
def test_loss_unit_values(record_property):
    d = discriminator_loss(np.array([0.5]), np.array([0.5])).data
    cases = {
        "minimax(0.5)": (generator_loss(np.array([0.5]), "minimax").data, -math.log(2), 1e-6),
        "non-saturating(0.5)": (generator_loss(np.array([0.5])).data, math.log(2), 1e-6),
        "non-saturating(0.9)": (generator_loss(np.array([0.9])).data, 0.105361, 1e-6),
        "D(0.8, 0.3)": (discriminator_loss(np.array([0.8]), np.array([0.3])).data,
                        0.5 * (-math.log(0.8) - math.log(0.7)), 1e-12),
    }
    record_property("detail", f"D(0.5, 0.5) - ln 2 = {d - math.log(2):.1e}; "
                    + ", ".join(f"{k} = {v[0]:.6f}" for k, v in cases.items()))
    assert abs(d - math.log(2)) <= 1e-12
    for got, want, tol in cases.values():
        assert abs(got - want) <= tol


# -- 10 -----------------------------------------------------------------------

@criterion(10, "Determinism of train and generate")
def test_determinism(tmp_path, record_property):
    doc = {"out_dir": str(tmp_path / "a"), "synth": {"n_days": 2},
           "data": {"fast_csv": str(tmp_path / "a" / "fast.csv"),
                    "slow_csv": str(tmp_path / "a" / "slow.csv")},
           "training": {"total_steps": 25}}
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    assert main(["synth", "--config", str(cfg), "--seed", "5"]) == 0
    for out in ("r1", "r2"):
        assert main(["train", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / out)]) == 0
        assert main(["generate", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / out),
                     "--checkpoint", str(tmp_path / out / "constrained"), "--n", "50"]) == 0
    h1, h2 = ((tmp_path / r / "constrained" / "history.csv").read_bytes() for r in ("r1", "r2"))
    p1, p2 = ((tmp_path / r / "profiles_constrained.csv").read_bytes() for r in ("r1", "r2"))
    record_property("detail", f"history {len(h1.splitlines()) - 1} rows identical: {h1 == h2}; "
                              f"profiles identical: {p1 == p2}")
    assert h1 == h2
    assert p1 == p2
