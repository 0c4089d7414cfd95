"""Fitted decay exponent of the position diameter against the kernel singularity alpha.

1D, quadratic confinement, psi(r) = r^-alpha. The predicted exponent is 1/alpha.

    python scripts/sweep_singular_exponent.py --alphas 0.4 0.5 0.6 --t-final 200
"""
import argparse

from alignflow.dynamics import SimConfig, simulate
from alignflow.ensemble import sample_initial
from alignflow.kernels import KernelSpec
from alignflow.potentials import PotentialSpec
from alignflow.ratefit import fit_algebraic, window_ratio


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alphas", type=float, nargs="+", default=[0.4, 0.5, 0.6])
    parser.add_argument("--n", type=int, default=32)
    parser.add_argument("--t-final", type=float, default=200.0)
    args = parser.parse_args()
    e0 = sample_initial({"kind": "density_quantiles", "density": "uniform", "support": [-1.0, 1.0],
                         "velocity": {"kind": "sine", "amplitude": 0.3, "wavenumber": 2.0}}, args.n)
    cfg = SimConfig(t_final=args.t_final, record_interval=args.t_final / 2000)
    print("alpha  predicted  fitted   window_ratio")
    for alpha in args.alphas:
        traj = simulate(e0, cfg, PotentialSpec.quadratic(1.0), KernelSpec.power_law(alpha, 1.0))
        t, d = traj.column("t")[1:], traj.column("D_eta")[1:]
        fit = fit_algebraic(t, d)
        print(f"{alpha:5.2f}  {1 / alpha:9.3f}  {fit.value:7.3f}  {window_ratio(t, d, 1 / alpha):8.3f}")


if __name__ == "__main__":
    main()
