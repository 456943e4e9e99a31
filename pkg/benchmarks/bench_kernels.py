"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Both variants are called directly, so the ULTDOA_DISABLE_NUMBA flag does not
matter here.  The first numba call (JIT compile or cache load) is excluded.
"""
import argparse
import timeit

import numpy as np

from ultdoa import kernels
from ultdoa.estimator import linear_filters
from ultdoa.signal import SrsConfig


def cases(rng):
    cfg = SrsConfig()
    f = linear_filters(cfg.k_tc)
    pilots = rng.standard_normal((cfg.n_rx * cfg.n_symb_srs * 4, cfg.m_sc)) + 0j
    comb_args = (pilots, cfg.k0, cfg.k_tc, cfg.n_sc, f.start, f.middle, f.end)

    t = cfg.n_fft * cfg.oversampling
    cir = rng.standard_normal((4, 1, cfg.n_symb_srs, t)) + 1j * rng.standard_normal((4, 1, cfg.n_symb_srs, t))

    anchors = np.array([[0, 0, 2.2], [-40, 0, 2.2], [-40, 30, 2.2], [0, 30, 2.2]])
    rd = np.array([0.0, 3.1, -4.2, 1.7])
    xs = np.linspace(-50, 10, 301)
    ys = np.linspace(-10, 40, 251)
    grid_args = (xs, ys, 1.3, anchors, 0, rd)

    return {
        "comb_interpolate": comb_args,
        "averaged_power": (cir,),
        "tdoa_grid_cost": grid_args,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    if not kernels.HAVE_NUMBA:
        print("numba is not importable; only the numpy path would run")
        return 1
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, fargs in cases(np.random.default_rng(0)).items():
        fn_np = getattr(kernels, f"{name}_numpy")
        fn_nb = getattr(kernels, f"{name}_numba")
        np.testing.assert_allclose(fn_nb(*fargs), fn_np(*fargs), rtol=1e-12, atol=1e-12)
        t_np = min(timeit.repeat(lambda: fn_np(*fargs), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn_nb(*fargs), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
