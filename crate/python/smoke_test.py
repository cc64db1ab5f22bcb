"""Smoke test for the sublinpot extension module."""

import math

import sublinpot as sp


def main():
    # scalar equation u = sqrt(u) + 2
    u, report = sp.solve_minimal(sp.Problem.fixture("scalar"), 1e-15)
    assert abs(u.values()[0] - 4.0) < 1e-12, u.values()
    assert report["converged"]

    grid = sp.BoxGrid.centered([0.0, 0.0], 1.0 / 8.0, [32, 32])
    k = sp.KernelSpec.riesz(2, 1.0)
    sigma = sp.Measure.bump(grid, [0.0, 0.0], 0.6, 1.0)
    omega = sp.Measure.bump(grid, [0.3, 0.2], 0.4, 0.5)
    p = sp.Problem(k, [(sigma, 0.5)], omega, 1.0, grid)
    u, report = sp.solve_minimal(p, 1e-10)
    assert report["converged"] and report["monotonicity_violations"] == 0
    assert sp.residual(p, u) <= 1e-9
    assert min(u.values()) > 0.0

    cond = sp.conditions(p)
    assert cond["verdict"]
    assert sp.exponents(1.0, 2.0, 3) == (6.0, 2.0)
    energy = sp.energy_identity(p, u)
    assert energy["relative_gap"] <= 0.05, energy

    unit = sp.KernelSpec.riesz(3, 2.0, "unit")
    atom = sp.Measure.from_atoms(3, [([0.0, 0.0, 0.0], 1.0)])
    assert sp.potential_at(unit, atom, [0.0, 0.0, 2.0]) == 0.5

    ones = sp.GridFunction(sp.BoxGrid([0.5, 0.5], 1.0, [1, 1]), [1.0])
    assert abs(sp.lorentz(ones, 6.0, 2.0) - math.sqrt(3.0)) < 1e-15

    try:
        sp.Problem(k, [(sigma, 1.5)], omega, 1.0, grid)
    except ValueError as e:
        assert "q must lie in (0,1)" in str(e)
    else:
        raise AssertionError("q = 1.5 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
