#!/usr/bin/env python3
"""Run the Lyapunov ergodicity certification across the model catalog and
print a one-line verdict per model/kind combination."""

from envqueue.catalog import (
    base_stock,
    mm1_plain,
    onoff_a,
    perishable_minus,
    perishable_o,
    perishable_plus,
)
from envqueue.ergodicity import LyapunovCertificate, certify

MODELS = [
    ("mm1_plain", mm1_plain(lam=1, mu=2)),
    ("mm1_plain (unstable)", mm1_plain(lam=2, mu=1)),
    ("base_stock b=2", base_stock(lam=1, mu=2, nu=1, b=2)),
    ("base_stock b=3", base_stock(lam=1, mu=2, nu=1, b=3)),
    ("onoff_a", onoff_a(eta=1.0, gamma=2.0, lam=0.5, mu=2.0)),
    ("perishable_minus", perishable_minus(lam=1, mu=2, nu=1, gamma=1, b=2)),
    ("perishable_o", perishable_o(lam=1, mu=2, nu=1, gamma=1, b=2)),
    ("perishable_plus", perishable_plus(lam=1, mu=2, nu=1, gamma=1, b=2)),
]


def main():
    for kind in ("linear_drift", "hitting_time"):
        print(f"== kind: {kind}")
        for name, model in MODELS:
            result = certify(model, kind=kind)
            if isinstance(result, LyapunovCertificate):
                print(f"  {name:24s} certified  eps={result.eps:.6g}  "
                      f"margin={result.worst_margin:.3e}")
            else:
                print(f"  {name:24s} NOT certified: {result.reason} {result.detail}")


if __name__ == "__main__":
    main()
