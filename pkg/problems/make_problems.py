"""Regenerate the bundled problem files: ``python3 problems/make_problems.py``."""
from pathlib import Path

from pmo.io import Problem, dumps_problem
from pmo.polyalg import PolyMatrix, Polynomial


def instances():
    x1, x2, x3 = Polynomial.variables(3)
    nrm = x1**2 + x2**2 + x3**2
    ball_hankel = PolyMatrix.from_rows(3, [[1 - nrm, 0, 0], [0, x1, x2], [0, x2, x3]])
    yield Problem(x1 * x3 - x2**2 + x1 + x3, ball_hankel, "hankel_ball")
    yield Problem(3 * x1 + 2 * x2, PolyMatrix.from_rows(3, [[x1, x3], [x3, x1**2 - x2**2 - nrm**2]]), "ndc_fails")
    yield Problem(x1 * x3 - x2**2, ball_hankel, "scc_fails")
    y1, y2, y3, y4 = Polynomial.variables(4)
    n4 = y1**2 + y2**2 + y3**2 + y4**2
    f3 = (y1**4 * y2**2 + y1**2 * y2**4 + y3**6 + y4**6 - 3 * y1**2 * y2**2 * y3**2
          + 0.01 * (y1**6 + y2**6 + y3**6))
    yield Problem(f3, PolyMatrix.from_rows(4, [[1 - y4**2, y3 * y4], [y3 * y4, 1 - n4]]), "sosc_fails")
    yield Problem(-x1 - x2 - x3, PolyMatrix.from_rows(3, [[1, x1, x2], [x1, 1, x3], [x2, x3, 1]]), "elliptope")
    f2 = (x1**4 + x2**4 + x3**4) / 3 + x1**2 * x2**2 + (x1 - 1)**2 + (x2 - 1)**2 + (x3 - 1)**2
    G2 = PolyMatrix.from_rows(3, [[2 - x1**2 - 2 * x3**2, 1 + x1 * x2, x1 * x3],
                                  [1 + x1 * x2, 2 - x2**2 - 2 * x1**2, 1 + x2 * x3],
                                  [x1 * x3, 1 + x2 * x3, 2 - x3**2 - 2 * x2**2]])
    yield Problem(f2, G2, "sos_convex")


if __name__ == "__main__":
    here = Path(__file__).parent
    for prob in instances():
        (here / f"{prob.name}.json").write_text(dumps_problem(prob), encoding="utf-8")
        print(prob.name)
