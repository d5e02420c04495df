"""Smoke test for the Python bindings: small, fast calls through each entry point."""

import json
import math

import crack_lattice as cl


def main():
    assert cl.potential_kernel(1, 0) == 1.0
    assert abs(cl.potential_kernel(1, 1) - 4 / math.pi) < 1e-14
    assert abs(cl.potential_kernel_quadrature(3, 4) - cl.potential_kernel(3, 4)) < 1e-12
    assert abs(cl.boundary_difference((0, 1), "+e1") - (1 / math.pi - 0.25)) < 1e-12

    g = cl.solve_green((3, 2), 48, 1e-11)
    assert g.value(-5, 0) == 0.0
    assert g.residual <= 1e-11
    assert len(g.values()) > 7000
    print(g, "decay constant", round(g.decay_constant(), 4))

    try:
        cl.solve_green((-2, 0), 48)
    except ValueError as e:
        print("rejected source on the crack:", e)
    else:
        raise AssertionError("expected ValueError")

    eq = cl.dislocate([(3, 2, 1)], 64)
    assert abs(eq.winding(3, 2) - 1.0) < 1e-6
    assert abs(eq.winding(5, 5)) < 1e-6
    assert eq.winding(0, 0) is None
    assert eq.strain_max() < 0.49

    sol = cl.equilibrate([(3, 2, 1)], 0.02, 64)
    assert sol.residual <= 1e-10 and sol.margin > 0
    profile = sol.opening_profile(16)
    print("K", sol.K, "iterations", sol.iterations, "opening(16) =", round(profile[-1][1], 4))

    try:
        cl.equilibrate([(3, 2, 1)], 0.45, 128)
    except cl.BifurcationError as e:
        print("bifurcation:", e)
    else:
        raise AssertionError("expected BifurcationError")

    report = json.loads(cl.verify(64, 1))
    print("verify at R=64:", {c["id"]: c["pass"] for c in report["checks"]})
    print("smoke test passed")


if __name__ == "__main__":
    main()
