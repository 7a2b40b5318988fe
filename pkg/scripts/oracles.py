"""Recompute the reference numbers frozen into the test suite.

Everything here is independent of the package: a high-order adaptive
integrator for trajectories and event times, polynomial roots for the
robust radii, and a brute-force grid for the disturbance ceiling.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp

RTOL, ATOL = 1e-13, 1e-15


def bernoulli(kappa, lam, p):
    return lambda t, y: kappa * y + lam * y ** (p + 1)


def trajectory_value(kappa, lam, p, y0, t):
    sol = solve_ivp(bernoulli(kappa, lam, p), (0, t), [y0], method="DOP853", rtol=RTOL, atol=ATOL)
    return sol.y[0, -1]


def first_crossing(kappa, lam, p, y0, level, t_max):
    event = lambda t, y: abs(y[0]) - level
    event.terminal = True
    sol = solve_ivp(bernoulli(kappa, lam, p), (0, t_max), [y0], method="DOP853",
                    rtol=RTOL, atol=ATOL, events=event)
    return sol.t_events[0][0]


def main():
    print("trajectory values")
    print("  kappa=-1 lam=1 p=2 y0=0.5 t=ln2/2:", trajectory_value(-1.0, 1.0, 2, 0.5, math.log(2) / 2))
    print("  kappa=0  lam=1 p=2 y0=1   t=0.25 :", trajectory_value(0.0, 1.0, 2, 1.0, 0.25))
    print("  kappa=-1 lam=0     y0=0.5 t=1    :", trajectory_value(-1.0, 0.0, 2, 0.5, 1.0))

    print("settling (|y| = 0.01)")
    print("  kappa=-1 lam=1    y0=0.5:", first_crossing(-1, 1, 2, 0.5, 0.01, 20))
    print("  kappa=-2 lam=0    y0=1  :", first_crossing(-2, 0, 2, 1.0, 0.01, 20))
    print("  kappa=-1 lam=-0.5 y0=0.5:", first_crossing(-1, -0.5, 2, 0.5, 0.01, 20))

    print("escape crossings")
    for level in (1e3, 1e5, 1e7):
        print(f"  even p=2 y0=2  level {level:g}:", first_crossing(-1, 1, 2, 2.0, level, 1.0))
    for level in (1e3, 1e5, 1e7):
        print(f"  odd  p=1 y0=-2 level {level:g}:", first_crossing(-1, -1, 1, -2.0, level, 1.0))
    print("  two escaping modes, 0.5 ln(9/8):", 0.5 * math.log(9 / 8))

    print("robust radii")
    roots = np.roots([1.0, 0.0, -1.0, 0.15])
    print("  s^3 - s + 0.15 positive roots:", sorted(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0))
    roots = np.roots([-0.5, 0.0, -1.0, 0.15])
    print("  -0.5 s^3 - s + 0.15 real root:", [r.real for r in roots if abs(r.imag) < 1e-12])

    print("disturbance ceiling (10^6-point grid)")
    for kappa in (-1.0, -2.0):
        s = np.linspace(0.0, math.sqrt(-kappa), 10**6)
        print(f"  kappa={kappa}: max -kappa s - s^3 =", float(np.max(-kappa * s - s**3)))


if __name__ == "__main__":
    main()
