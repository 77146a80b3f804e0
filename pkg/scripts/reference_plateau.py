"""Run the bundled ball benchmark and compare the plateau against closed forms.

    python scripts/reference_plateau.py [--steps 1000] [--out runs/plateau]
"""
import argparse
import math

from softrelax.scenario import load_scenario, run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--out", default="runs/plateau")
    args = ap.parse_args()

    res = run_scenario(load_scenario("ball_plateau"), out_dir=args.out, verify="energy", steps=args.steps)
    s = res.summary
    want = {
        "t0_detected": math.sqrt(3) / 4,
        "sigma_dev_norm": math.sqrt(3) / 2,
        "p_norm": math.sqrt(3) / 4,
        "conc_zhat": 0.25,
        "diss_H": 0.5,
    }
    got = {
        "t0_detected": s["t0_detected"],
        "sigma_dev_norm": s["final_stress"]["sigma_dev_norm"],
        "p_norm": s["final_plastic_strain"]["norm"],
        "conc_zhat": s["conc_zhat"],
        "diss_H": s["diss_H"],
    }
    print(f"{'quantity':<16}{'computed':>22}{'closed form':>22}{'error':>12}")
    for k, w in want.items():
        print(f"{k:<16}{got[k]:>22.15f}{w:>22.15f}{abs(got[k] - w):>12.1e}")
    print(f"energy residual {s['energy_residual']:.2e}; output in {res.out_dir}")


if __name__ == "__main__":
    main()
