"""Solve an SDP problem dumped as JSON with cvxpy (independent cross-check)."""
import json
import sys

import cvxpy as cp
import numpy as np


def build(path):
    d = json.load(open(path))
    y = cp.Variable(d["num_vars"])
    cons = []
    for blk in d["blocks"]:
        n = blk["size"]
        m = np.zeros((n, n))
        for r, c, v in blk["constant"]:
            m[r, c] += v
            if r != c:
                m[c, r] += v
        expr = m
        terms = {}
        for var, r, c, a in blk["coeffs"]:
            e = terms.setdefault(var, np.zeros((n, n)))
            e[r, c] += a
            if r != c:
                e[c, r] += a
        expr = m + sum(y[v] * e for v, e in terms.items()) if terms else m
        if n == 1:
            cons.append(expr >= 0)
        else:
            cons.append(cp.bmat([[expr[i, j] if not isinstance(expr, np.ndarray) else expr[i, j] for j in range(n)] for i in range(n)]) >> 0)
    for eq in d["equalities"]:
        cons.append(sum(a * y[v] for v, a in eq["coeffs"]) == eq["rhs"])
    obj = cp.Minimize(np.array(d["objective"]) @ y + d["objective_constant"])
    return cp.Problem(obj, cons), y


if __name__ == "__main__":
    prob, y = build(sys.argv[1])
    solver = sys.argv[2] if len(sys.argv) > 2 else "CLARABEL"
    prob.solve(solver=solver)
    print(json.dumps({"status": prob.status, "objective": prob.value}))
