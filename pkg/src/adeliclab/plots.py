"""Figure rendering for the report commands.

Each function takes the same row tuples the CSV writer sees plus an
output path, draws one PNG, and closes the figure.  Matplotlib is
imported lazily with the Agg backend so headless runs work and the
import cost is only paid when a figure is actually requested.
"""


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def tate_contraction(rows, path: str):
    plt = _pyplot()
    ns = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ns, [max(r[1], 1e-18) for r in rows], "o-", label="sup |h_{n+1} - h_n|")
    ax.semilogy(ns, [max(r[2], 1e-18) for r in rows], "--", label="contraction bound")
    ax.set_xlabel("depth n")
    ax.legend()
    ax.set_title("Fixed-point iteration on the potential grid")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def chi_error(rows, path: str):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog([r[0] for r in rows], [max(r[3], 1e-18) for r in rows], "o-")
    ax.set_xlabel("lattice level n")
    ax.set_ylabel("absolute error")
    ax.set_title("Lattice-point estimate vs closed form")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def transform_roof(rows, path: str):
    from fractions import Fraction

    plt = _pyplot()
    xs = [float(Fraction(r[0])) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [r[1] for r in rows], "o-")
    ax.set_xlabel("x")
    ax.set_ylabel("G(x)")
    ax.set_title("Concave transform")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def equi_gaps(rows, path: str):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    by_id = {}
    for r in rows:
        by_id.setdefault(r[1], []).append((r[0], r[4]))
    for f_id, pts in sorted(by_id.items()):
        ax.semilogy([p[0] for p in pts], [max(p[1], 1e-18) for p in pts],
                    "o-", label=f_id)
    ax.set_xlabel("n")
    ax.set_ylabel("|delta_n(f) - limit|")
    ax.legend(fontsize=8)
    ax.set_title("Equidistribution gaps by test function")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def envelope_deficit(rows, path: str):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy([r[0] for r in rows], [max(r[2], 1e-18) for r in rows], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("max deficit")
    ax.set_title("Envelope approximation from below")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
