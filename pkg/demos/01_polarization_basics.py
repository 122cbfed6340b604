"""Stokes vectors and Mueller matrices: the package's polarization core.

Walks through the optical elements used by the rotating-ellipsometry
capture path (linear polarizer, half- and quarter-wave plates), the Fresnel
reflection/transmission Mueller matrices, and the physicality test applied
throughout the test suite.
"""

import numpy as np

from polartof import mueller as M


def main():
    np.set_printoptions(precision=4, suppress=True)

    print("== Optical elements at angle 0 ==")
    for name in ("lp", "hwp", "qwp"):
        print(f"\n{name.upper()}:")
        print(np.asarray(M.element_mueller(name, 0.0)))

    print("\n== Unpolarized light through a polarizer ==")
    s_unpol = np.array([1.0, 0.0, 0.0, 0.0])
    s_out = np.asarray(M.element_mueller("lp", 0.0)) @ s_unpol
    print(f"in  {s_unpol}  DOP {M.degree_of_polarization(s_unpol):.3f}")
    print(f"out {s_out}  DOP {M.degree_of_polarization(s_out):.3f}")

    print("\n== Quarter-wave plate turns circular into linear ==")
    s_circ = np.array([1.0, 0.0, 0.0, 1.0])
    s_lin = np.asarray(M.element_mueller("qwp", 0.0)) @ s_circ
    print(f"circular {s_circ} -> {s_lin}")

    print("\n== Fresnel reflection at eta = 1.5 ==")
    for deg in (0.0, 30.0, 56.31, 80.0):
        fr = np.asarray(M.fresnel_mueller("reflect", 1.5, np.radians(deg)))
        s = fr @ np.array([1.0, 0.0, 0.0, 0.0])
        print(f"theta {deg:5.1f} deg: R00 {fr[0, 0]:.4f}  "
              f"reflected DOP {M.degree_of_polarization(s):.4f}")
    print("(the DOP reaches 1 at Brewster's angle, atan(1.5) ~ 56.3 deg)")

    print("\n== Energy split: reflectance + transmittance = 1 ==")
    for deg in (0.0, 45.0, 70.0):
        r = np.asarray(M.fresnel_mueller("reflect", 1.5, np.radians(deg)))
        t = np.asarray(M.fresnel_mueller("transmit", 1.5, np.radians(deg)))
        print(f"theta {deg:4.1f} deg: {r[0, 0]:.4f} + {t[0, 0]:.4f} "
              f"= {r[0, 0] + t[0, 0]:.6f}")

    print("\n== Physicality check ==")
    good = np.asarray(M.element_mueller("qwp", 0.7))
    bad = np.diag([1.0, 1.0, 1.0, 1.5])  # would amplify polarization
    print(f"QWP(0.7) physical: {M.is_physical(good)}")
    print(f"diag(1,1,1,1.5) physical: {M.is_physical(bad)}")


if __name__ == "__main__":
    main()
