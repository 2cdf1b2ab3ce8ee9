"""Fast invariant suite behind the `selftest` CLI subcommand.

Each check is a pure function returning (ok, detail).  The suite covers the
load-bearing identities: transform round trips against a direct DFT sum,
projector algebra, Parseval, symbol Hermiticity, the eigendecomposition
semigroup against a scaling-and-squaring matrix exponential, generator
determinism, exact power-law fitting and energy monotonicity of a short
nonlinear run.  Runs in well under a minute.
"""

from __future__ import annotations

import numpy as np

from .analysis import fit_decay_exponent
from .decay_character import generate_data_with_character
from .fields import (Grid, PhysParams, StateField, l2_norm_sq, leray_project,
                     physical_norm_sq)
from .grid import forward
from .propagator import get_propagator
from .solver import SolverConfig, energy_balance_check, simulate
from .symbol import (assemble_symbol, rotation_symbol, sample_wavevectors,
                     sector_lambda_max, semigroup_apply)


def _dft_oracle(phys: np.ndarray) -> np.ndarray:
    """O(n^6) direct DFT sum with the package normalization."""
    n = phys.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    x = np.arange(n)
    phase = np.exp(-2j * np.pi * np.outer(k, x) / n)
    return np.einsum("Ka,Lb,Mc,abc->KLM", phase, phase, phase, phys) / n ** 3


def check_roundtrip() -> tuple[bool, str]:
    grid = Grid(16, 2 * np.pi)
    rng = np.random.Generator(np.random.Philox(7))
    state = StateField.from_physical(grid, *(rng.normal(size=(3, 16, 16, 16))
                                             for _ in range(3)))
    from .fields import transform_roundtrip
    rt = transform_roundtrip(state)
    err = max(np.abs(a - b).max() for a, b in zip(rt.components(), state.components()))
    return err < 1e-12, f"roundtrip error {err:.2e}"


def check_dft_oracle() -> tuple[bool, str]:
    rng = np.random.Generator(np.random.Philox(8))
    phys = rng.normal(size=(8, 8, 8))
    err = np.abs(forward(phys) - _dft_oracle(phys)).max()
    return err < 1e-13, f"fftn vs direct DFT {err:.2e}"


def check_leray() -> tuple[bool, str]:
    grid = Grid(16)
    rng = np.random.Generator(np.random.Philox(9))
    vhat = forward(rng.normal(size=(3, 16, 16, 16)))
    proj = leray_project(grid, vhat)
    div = np.abs((grid.xi_odd * proj).sum(axis=0)).max()
    twice = np.abs(leray_project(grid, proj) - proj).max()
    ok = div < 1e-12 and twice < 1e-13
    return ok, f"max divergence {div:.2e}, idempotence {twice:.2e}"


def check_parseval() -> tuple[bool, str]:
    worst = 0.0
    for n in (8, 16):
        grid = Grid(n)
        rng = np.random.Generator(np.random.Philox(10 + n))
        phys = rng.normal(size=(n, n, n))
        spec = forward(phys)
        a = physical_norm_sq(grid, phys)
        b = l2_norm_sq(spec, grid)
        worst = max(worst, abs(a - b) / a)
    return worst < 1e-10, f"Parseval mismatch {worst:.2e}"


def check_symbol() -> tuple[bool, str]:
    params = PhysParams()
    xis = sample_wavevectors(200, seed=11)
    worst_herm = 0.0
    worst_sector = 0.0
    for xi in xis:
        M = assemble_symbol(xi, params)
        worst_herm = max(worst_herm, M.hermiticity_error())
        s = np.linalg.norm(xi)
        worst_sector = max(worst_sector,
                           abs(M.lambda_max - sector_lambda_max(s, params)))
    ok = worst_herm < 1e-14 and worst_sector < 1e-10
    return ok, f"hermiticity {worst_herm:.2e}, sector eig dev {worst_sector:.2e}"


def check_semigroup_oracle() -> tuple[bool, str]:
    from scipy.linalg import expm
    params = PhysParams()
    rng = np.random.Generator(np.random.Philox(12))
    xis = sample_wavevectors(100, radius_hi=10.0, seed=12)
    worst = 0.0
    for xi in xis:
        M = assemble_symbol(xi, params)
        t = rng.uniform(0, 2)
        v = rng.normal(size=9) + 1j * rng.normal(size=9)
        ref = expm(t * M.entries) @ v
        got = semigroup_apply(M, t, v)
        worst = max(worst, np.abs(ref - got).max() / max(np.abs(ref).max(), 1e-300))
    return worst < 1e-11, f"eigen semigroup vs expm {worst:.2e}"


def check_rotation_spectrum() -> tuple[bool, str]:
    lam = np.linalg.eigvalsh(rotation_symbol([3.0, 4.0, 0.0]))
    err = np.abs(lam - np.array([-5.0, 0.0, 5.0])).max()
    return err < 1e-13, f"rotation spectrum dev {err:.2e}"


def check_generator_determinism() -> tuple[bool, str]:
    grid = Grid(16)
    a = generate_data_with_character(grid, 0.5, seed=99)
    b = generate_data_with_character(grid, 0.5, seed=99)
    same = all(x.tobytes() == y.tobytes()
               for x, y in zip(a.components(), b.components()))
    return same, "bitwise identical" if same else "seed reuse differs"


def check_fit_exact() -> tuple[bool, str]:
    t = np.linspace(0, 100, 60)
    vals = (1 + t) ** -1.5
    exp, res = fit_decay_exponent((t, vals), (0, 100))
    ok = abs(exp + 1.5) < 1e-10 and res < 1e-10
    return ok, f"exponent {exp:.12f}, residual {res:.2e}"


def check_energy_monotone() -> tuple[bool, str]:
    grid = Grid(8, 2 * np.pi)
    z0 = generate_data_with_character(grid, 0.0, seed=3, amplitude=1e-2)
    cfg = SolverConfig(grid=grid, params=PhysParams(), dt=0.05, t_end=0.5)
    traj = simulate(cfg, z0)
    rep = energy_balance_check(traj)
    ok = rep["monotone"] and traj.diagnostics["max_divergence"] < 1e-10
    return ok, (f"monotone={rep['monotone']}, "
                f"divergence {traj.diagnostics['max_divergence']:.2e}")


def check_grid_propagator() -> tuple[bool, str]:
    grid = Grid(8)
    params = PhysParams()
    prop = get_propagator(grid, params)
    rng = np.random.Generator(np.random.Philox(21))
    z = StateField(grid, *(rng.normal(size=(3, 8, 8, 8))
                           + 1j * rng.normal(size=(3, 8, 8, 8)) for _ in range(3)))
    out = prop.evolve(z, 0.3)
    worst = 0.0
    for idx in ((1, 2, 3), (0, 0, 1), (3, 7, 5)):
        xi = np.array([grid.xi[a][idx] for a in range(3)])
        v = np.concatenate([z.uhat[(slice(None),) + idx],
                            z.what[(slice(None),) + idx],
                            z.bhat[(slice(None),) + idx]])
        ref = semigroup_apply(assemble_symbol(xi, params), 0.3, v)
        got = np.concatenate([out.uhat[(slice(None),) + idx],
                              out.what[(slice(None),) + idx],
                              out.bhat[(slice(None),) + idx]])
        worst = max(worst, np.abs(ref - got).max())
    return worst < 1e-11, f"grid vs per-mode semigroup {worst:.2e}"


CHECKS = [
    ("transform roundtrip", check_roundtrip),
    ("direct DFT oracle", check_dft_oracle),
    ("Leray projection", check_leray),
    ("Parseval identity", check_parseval),
    ("symbol hermiticity + sector spectrum", check_symbol),
    ("semigroup vs expm oracle", check_semigroup_oracle),
    ("rotation symbol spectrum", check_rotation_spectrum),
    ("generator determinism", check_generator_determinism),
    ("exact power-law fit", check_fit_exact),
    ("energy monotone micro-run", check_energy_monotone),
    ("grid propagator vs symbol", check_grid_propagator),
]


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # pragma: no cover - defensive
            ok, detail = False, f"raised {exc!r}"
        all_ok = all_ok and ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
