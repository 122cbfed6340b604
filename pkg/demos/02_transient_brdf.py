"""The temporal-polarimetric BRDF: surface and sub-surface light in time.

The reflectance model splits light into a prompt, polarized surface bounce
(GGX microfacet with Fresnel polarization) and a delayed, depolarizing
sub-surface component.  Each is modulated by a bank of four time-domain
Gaussians, one per polarimetric channel, so the full reflectance is a
4x4 Mueller matrix per time delay.
"""

import numpy as np

from polartof import brdf as B
from polartof.mueller import LocalGeometry, degree_of_polarization


def main():
    np.set_printoptions(precision=4, suppress=True)

    mat = B.Material(
        eta=1.5, roughness=0.3,
        surface=B.TimeGaussBank(
            a=np.array([4.0, 3.4, 3.2, 2.6]),
            mu=np.full(4, 50e-12), sigma=np.full(4, 20e-12)),
        subsurface=B.TimeGaussBank(
            a=np.array([3e-3, 1.2e-3, 1e-3, 4e-4]),
            mu=np.full(4, 500e-12), sigma=np.full(4, 150e-12)))

    # coaxial geometry, 20 degrees off the surface normal
    tilt = np.radians(20.0)
    omega = np.array([np.sin(tilt), 0.0, np.cos(tilt)])
    n = np.array([0.0, 0.0, 1.0])
    geom = LocalGeometry(omega_i=omega, omega_o=omega, n=n)

    taus = (np.arange(64) + 0.5) * 25e-12
    print("== Temporal profile of H00 (intensity-to-intensity) ==")
    print(f"{'tau (ps)':>9} {'surface':>11} {'subsurface':>11} {'DOP':>7}")
    for t in range(0, 64, 4):
        surf = np.asarray(B.surface_term(taus[t], geom, mat))
        sub = np.asarray(B.subsurface_term(taus[t], geom, mat))
        full = surf + sub
        s_out = full @ np.array([1.0, 1.0, 0.0, 0.0])
        dop = (degree_of_polarization(s_out) if s_out[0] > 1e-12 else 0.0)
        print(f"{taus[t] / 1e-12:9.1f} {surf[0, 0]:11.3e} "
              f"{sub[0, 0]:11.3e} {dop:7.3f}")
    print("\nThe prompt surface peak keeps the illumination polarized; the")
    print("late sub-surface tail is depolarized -- separating the two in")
    print("time is what makes all-photon material estimation possible.")

    print("\n== Roughness controls the angular width of the surface lobe ==")
    for m in (0.1, 0.3, 0.6, 1.0):
        row = []
        for deg in (0.0, 15.0, 30.0, 45.0):
            th = np.radians(deg)
            w = np.array([np.sin(th), 0.0, np.cos(th)])
            g = LocalGeometry(omega_i=w, omega_o=w, n=n)
            mat_m = B.Material(eta=1.5, roughness=m, surface=mat.surface,
                               subsurface=mat.subsurface)
            row.append(float(np.asarray(
                B.surface_term(50e-12, g, mat_m))[0, 0]))
        rel = " ".join(f"{v / row[0]:6.3f}" for v in row)
        print(f"m = {m:.1f}: relative peak vs angle (0/15/30/45 deg): {rel}")


if __name__ == "__main__":
    main()
