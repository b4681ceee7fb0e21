"""Out-of-sample error of thresholded l1 and decomp solutions across seeds.

Both relaxations are solved under the same cardinality bound and rounded to
the same number of nonzeros, so the comparison is at matched sparsity.
"""

import argparse
import csv
import sys

import numpy as np

from l0conic.cutting import solve_decomp
from l0conic.data import SyntheticConfig, make_synthetic, metrics
from l0conic.exact import threshold_round
from l0conic.model import build_instance, SparsityPriors
from l0conic.relax import RelaxationKind, build_relaxation


def errors_for_seed(seed, n, s, h, sigma, lam, k):
    syn = make_synthetic(SyntheticConfig(n, s, h, sigma, seed))
    inst = build_instance(syn.y.values, lam=lam, priors=SparsityPriors.cardinality(k))
    l1 = build_relaxation(inst, RelaxationKind.L1).solve()
    dec = solve_decomp(inst)
    out = {}
    for method, x in (("l1", l1.x), ("decomp", dec.x_star)):
        x_bar, _ = threshold_round(np.clip(x, 0, None), k, inst)
        m = metrics(x_bar, syn.y_true.values, syn.y.values)
        out[method] = m
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--spikes", type=int, default=10)
    p.add_argument("--spike-len", type=int, default=10)
    p.add_argument("--sigmas", default="0.3,0.5")
    p.add_argument("--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", default="-")
    a = p.parse_args(argv)
    fh = sys.stdout if a.out == "-" else open(a.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["sigma", "seed", "method", "error", "false_pos", "false_neg", "nnz"])
    for sigma in (float(v) for v in a.sigmas.split(",")):
        for seed in range(a.seeds):
            res = errors_for_seed(seed, a.n, a.spikes, a.spike_len, sigma, a.lam, a.k)
            for method, m in res.items():
                w.writerow([sigma, seed, method, m["error"], m["false_pos"], m["false_neg"], m["nnz"]])
            fh.flush()


if __name__ == "__main__":
    main()
