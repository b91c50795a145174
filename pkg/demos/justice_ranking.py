"""Per-group audit of the bundled interruption-rate fixture.

Fits a Huber regression per justice, estimates the normalized reliance on
each covariate and ranks the justices. Also runs the stacked
cross-distribution check that backs the ranking.
"""

from importlib import resources

from blackbox_reliance import FitterSpec, LossSpec, Partition, load_chunks, rank_reliance, split_by_group

COVARIATES = ("gender", "experience", "alignment")


def main():
    data = load_chunks(resources.files("blackbox_reliance") / "data" / "chunks_fixture.csv")
    spec = FitterSpec("huber", COVARIATES)
    groups = {g: (d, spec.fit(d, "interruption_rate")) for g, d in split_by_group(data, "justice").items()}
    sets = {c: Partition((c,), tuple(x for x in COVARIATES if x != c), "interruption_rate") for c in COVARIATES}
    report = rank_reliance(groups, LossSpec("square"), sets, validate=True)
    for label, order in report.orderings.items():
        values = ", ".join(f"{g} {report.value(g, label):.4f}" for g in order)
        chk = report.cross[label]
        print(f"{label:>10}: {values}  (stacked check diff {chk['max_abs_diff']:.1e}, "
              f"agree {chk['orderings_agree']})")


if __name__ == "__main__":
    main()
