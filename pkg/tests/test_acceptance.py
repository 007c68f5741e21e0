"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (bypassing pytest capture) so the
suite output doubles as a scorecard.  Tolerances are pinned in the
assertions; the slower Monte Carlo criteria reuse the packaged scenarios.
"""

import dataclasses

import numpy as np
import pytest

from lovsim.analysis import (
    IntensityMap,
    azimuthal_harmonics,
    find_cell_center,
    find_component_zeros,
    lattice_period,
    oam_spectrum,
    quadrupole_fidelity,
    visibility,
)
from lovsim.beamline import coherence_sigma, ideal_field, ideal_lov_state, simulate
from lovsim.config import load_config, load_scenario, scenario_text
from lovsim.core import SPIN_UP, make_grid, rotation_matrices, uniform_state
from lovsim.elements import (
    EnsembleMember,
    PhysicsParams,
    SpinFilter,
    period_from_physics,
    projection_intensity,
    spin_filter,
)
from lovsim.runner import apply_override, run_optimize

A = 5.0


@pytest.fixture()
def report(capsys, request):
    """Print one PASS/FAIL scorecard line per criterion, bypassing capture."""
    outcome = {"detail": ""}
    yield outcome
    label = request.node.name.replace("test_", "", 1)
    failed = getattr(request.node, "_report_failed", False)
    status = "FAIL" if failed else "PASS"
    with capsys.disabled():
        print(f"[acceptance] {status} {label}: {outcome['detail']}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    out = yield
    rep = out.get_result()
    if rep.when == "call" and rep.failed:
        item._report_failed = True


def test_01_coherence_number(report):
    sigma = coherence_sigma(0.41, 0.965, 1.0)
    report["detail"] = f"sigma = {sigma:.4f} um, expected 0.396 um (~0.4 um)"
    # 0.3957 um rounds to 0.396, which itself sits at 1% from 0.4
    assert sigma == pytest.approx(0.396, abs=5e-4)
    assert abs(sigma - 0.4) / 0.4 <= 0.011


def test_02_period_calibration(report):
    params = PhysicsParams(wavelength_nm=0.41, incline_angle_deg=60.0)
    a_low = period_from_physics(0.005, params)
    gradient = 2 * np.pi / period_from_physics(0.014, params)
    report["detail"] = (
        f"a(5 mT) = {a_low:.3f} mm in [3.7, 3.9]; "
        f"gradient(14 mT) = {gradient / np.pi:.3f} pi/mm in [1.4, 1.55]"
    )
    assert 3.7 <= a_low <= 3.9
    assert 1.4 * np.pi <= gradient <= 1.55 * np.pi


def test_03_closed_form_single_pair(report):
    grid = make_grid(25.0, 25.0, 0.1)
    field = ideal_lov_state(grid, A, 1)
    xm, ym = grid.mesh()
    analytic = (
        np.sin(np.pi * ym / A) ** 2 * np.cos(np.pi * xm / A) ** 2
        + np.cos(np.pi * ym / A) ** 2 * np.sin(np.pi * xm / A) ** 2
    )
    diff = np.max(np.abs(np.abs(field.down) ** 2 - analytic))
    report["detail"] = f"max |simulated - analytic| = {diff:.2e} <= 1e-12 on 250x250"
    assert diff <= 1e-12


def test_04_vortex_census(report):
    grid = make_grid(25.0, 25.0, 0.1)
    field = ideal_lov_state(grid, A, 1)
    zeros = find_component_zeros(field, "down", A, A / 4, A / 8)
    assert zeros, "no down-component zeros located"
    assert all(w in (-1, 1) for _, _, w in zeros)

    # nearest neighbors live on the opposite sublattice: signs alternate
    for x1, y1, w1 in zeros:
        others = [(np.hypot(x1 - x2, y1 - y2), w2)
                  for x2, y2, w2 in zeros if (x2, y2) != (x1, y1)]
        d_min = min(d for d, _ in others)
        for d, w2 in others:
            if d < 1.2 * d_min:
                assert w2 == -w1

    # per-unit-cell sum: weight boundary zeros by their share of the window
    total = 0.0
    for x, y, w in zeros:
        share = 1.0
        for u in (x, y):
            if abs(abs(u) - A) < 0.1:
                share *= 0.5
        total += share * w
    report["detail"] = (
        f"{len(zeros)} zeros, windings all +-1, neighbors alternate, "
        f"weighted sum = {total:+.2f}"
    )
    assert total == pytest.approx(0.0, abs=1e-9)


def test_05_spin_orbit_correlation(report):
    grid = make_grid(25.0, 25.0, 0.05)
    field = ideal_lov_state(grid, A, 2)
    center = find_cell_center(field, (0.0, 0.0), A / 4)
    down = oam_spectrum(field, center, "down", A / 8)
    up = oam_spectrum(field, center, "up", A / 8)
    report["detail"] = (
        f"down weight(l=-1) = {down.weights[-1]:.3f} >= 0.9, "
        f"up weight(l=0) = {up.weights[0]:.3f} >= 0.9 (delta_l = 1)"
    )
    assert down.weights[-1] >= 0.9
    assert up.weights[0] >= 0.9


def test_06_quadrupole_approximation(report):
    grid = make_grid(25.0, 25.0, 0.1)
    field = ideal_lov_state(grid, A, 1)
    center = find_cell_center(field, (0.0, 0.0), A / 4)
    fidelity = quadrupole_fidelity(field, center, A, A / 8)
    report["detail"] = f"fidelity = {fidelity:.4f} > 0.95"
    assert fidelity > 0.95


def test_07_offset_sweep_structure(report):
    bundle = load_scenario("fig3")
    text = scenario_text("fig3")
    a = 12.0  # the scenario pins the period, so the sweep offsets are 0, a/4, a/2
    assert bundle.sweep.values == (0.0, a / 4, a / 2)

    def maps(offset):
        config = load_config(apply_override(text, "elements[0].offset_mm", offset)).config
        field = ideal_field(config)
        minus = projection_intensity(field.up, field.down, (0.0, 0.0, -1.0))
        plus = projection_intensity(field.up, field.down, (0.0, 0.0, 1.0))
        return config.camera, minus, plus

    grid, minus0, plus0 = maps(0.0)
    i, j = grid.coord_to_index(0.0, 0.0)
    center_dark = minus0[j, i] < 0.05 * minus0.mean()

    _, minus_half, _ = maps(a / 2)
    swap = np.max(np.abs(minus_half - plus0))

    _, minus_quarter, _ = maps(a / 4)
    h = azimuthal_harmonics(IntensityMap(grid, minus_quarter), (0.0, 0.0), a / 8)

    report["detail"] = (
        f"offset 0: center/mean = {minus0[j, i] / minus0.mean():.4f}; "
        f"offset a/2 vs +z map: max diff = {swap:.1e} <= 1e-9; "
        f"offset a/4: m1/m2 = {h[1]:.3f}/{h[2]:.1e}"
    )
    assert center_dark
    assert swap <= 1e-9
    assert h[1] > 5 * h[2]


def test_08_divergence_washout_and_optimization(report):
    text = scenario_text("fig2a")
    # open the source slit so fringes fill the camera even at zero divergence
    text = apply_override(text, "source.slit_width_x_mm", 25.0)
    text = apply_override(text, "source.slit_width_y_mm", 25.0)
    base = load_config(text).config

    vis = []
    period = None
    for fwhm in (0.0, 1.0, 2.0):
        config = dataclasses.replace(
            base,
            source=dataclasses.replace(
                base.source, divergence_fwhm_x_deg=fwhm, divergence_fwhm_y_deg=fwhm
            ),
        )
        image = simulate(config, seed=101).intensity["-z"]
        m = IntensityMap(config.camera, image)
        if period is None:
            period = lattice_period(m, axis="x")
        vis.append(visibility(m, "x", period_mm=period))

    result = run_optimize(
        apply_override(
            apply_override(text, "source.divergence_fwhm_x_deg", 1.0),
            "source.divergence_fwhm_y_deg", 1.0,
        ),
        "visibility", free_indices=[3], seed=101,
    )

    report["detail"] = (
        f"visibility {vis[0]:.3f} > {vis[1]:.3f} > {vis[2]:.3f} over 0/1/2 deg; "
        f"optimized objective {result.objective:.3f} >= initial {result.initial_objective:.3f}"
    )
    assert vis[0] > vis[1] > vis[2]
    assert result.objective >= result.initial_objective


def test_09_conservation_suite(report):
    rng = np.random.default_rng(7)

    # unitarity of random element rotations
    axes = rng.normal(size=(50, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(-10, 10, size=50)
    unit_err = 0.0
    for axis, angle in zip(axes, angles):
        u = rotation_matrices(tuple(axis), np.array([angle]))[0]
        unit_err = max(unit_err, np.max(np.abs(u @ u.conj().T - np.eye(2))))

    # filter completeness at unit analyzing power
    grid = make_grid(25.0, 25.0, 0.1)
    members = [EnsembleMember(1.0, ideal_lov_state(grid, A, 1))]
    plus = spin_filter(members, SpinFilter(9.0, "+z", 1.0))
    minus = spin_filter(members, SpinFilter(9.0, "-z", 1.0))
    complete_err = np.max(np.abs(plus + minus - 1.0))

    # flux conservation without an analyzer
    from lovsim.beamline import BeamlineConfig, SourceModel
    from lovsim.elements import LovPrism

    config = BeamlineConfig(
        source=SourceModel(n_rays=50_000, divergence_fwhm_x_deg=0.2,
                           divergence_fwhm_y_deg=0.2),
        physics=PhysicsParams(),
        elements=(LovPrism(z_m=1.3, gradient_axis="x", current_a=2.5),),
        camera=grid,
        camera_z_m=1.6,
        polarization=1.0,
    )
    flux = simulate(config, seed=13, filter_directions=["none"]).intensity["none"].sum()

    # ensemble linearity in the polarization P
    config_p = dataclasses.replace(
        config,
        polarization=0.94,
        elements=config.elements + (SpinFilter(1.45, "-z", 1.0),),
        source=dataclasses.replace(config.source, n_rays=5000),
    )
    mixed = simulate(config_p, seed=17).intensity["-z"]
    pure_up = simulate(dataclasses.replace(config_p, polarization=1.0), seed=17).intensity["-z"]
    pure_dn = simulate(
        dataclasses.replace(config_p, polarization=1.0, polarizer_direction="-z"), seed=17
    ).intensity["-z"]
    linear_err = np.max(np.abs(mixed - (0.97 * pure_up + 0.03 * pure_dn)))

    report["detail"] = (
        f"unitarity {unit_err:.1e} <= 1e-12; completeness {complete_err:.1e} <= 1e-12; "
        f"flux {flux:.5f} within 0.1% of 1; linearity {linear_err:.1e} <= 1e-12"
    )
    assert unit_err <= 1e-12
    assert complete_err <= 1e-12
    assert flux == pytest.approx(1.0, rel=1e-3)
    assert linear_err <= 1e-12


def test_10_scenario_determinism(report):
    from fastapi.testclient import TestClient

    from lovsim.service import app

    with TestClient(app) as client:
        payload = {"scenario": "fig2a", "seed": 42}
        first = client.post("/run", json=payload)
        second = client.post("/run", json=payload)
    assert first.status_code == 200, first.text
    a, b = first.json(), second.json()
    identical = a["files"] == b["files"] and a["report"] == b["report"]
    report["detail"] = (
        f"two /run calls of fig2a with seed 42: {len(a['files'])} files "
        f"byte-identical = {identical}"
    )
    assert identical
