"""Print G0 >= G1 >= G2 >= H_eff at a few points for the ball benchmark.

Slow: each point takes a few seconds.

    python scripts/iterated_envelope.py
"""
import math

from softrelax.geometry import Ball, H_eff, SqrtPotential
from softrelax.laminates import iterated_envelope
from softrelax.tensors import DevTensor2

K, V, Z0 = Ball(1.0), SqrtPotential(0.5), 1.0
S = 1 / math.sqrt(2)
POINTS = [
    (DevTensor2(S, 0.0), 0.0),
    (DevTensor2(0.0, 0.0), 1.0),
    (DevTensor2(0.3, 0.2), -0.4),
    (DevTensor2(0.5 * S, 0.0), 0.6),
]


def main():
    print(f"{'|xi|':>6}{'theta':>7}{'G0':>11}{'G1':>11}{'G2':>11}{'H_eff':>11}  loose")
    for xi, th in POINTS:
        r = iterated_envelope(K, V, Z0, xi, th)
        h = float(H_eff(K, V, xi, th))
        print(f"{xi.norm():6.3f}{th:7.2f}{r.g0:11.6f}{r.g1:11.6f}{r.g2:11.6f}{h:11.6f}  {r.loose}")


if __name__ == "__main__":
    main()
