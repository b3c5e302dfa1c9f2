"""PNG figures for run reports.

Figures are drawn with the Agg backend and saved without a software or date
stamp, so a rerun with the same data and matplotlib version writes the same bytes.
"""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.0,
    "lines.markersize": 4,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def scaling_figure(path, rows, target):
    """sqrt(n) times each exponent against n, with the limit sqrt(2 D)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ns = np.array([r.n for r in rows], dtype=float)
        beta = [r.sqrt_n_beta for r in rows]
        ax.errorbar(ns, [b.mean for b in beta], yerr=[2 * b.stderr for b in beta], fmt="o-", color="C0",
                    capsize=2, label=r"$\sqrt{n}\,\hat\beta_n$ (sausage)")
        if all(r.alpha is not None for r in rows):
            alpha = [r.sqrt_n_alpha for r in rows]
            ax.errorbar(ns * 1.04, [a.mean for a in alpha], yerr=[2 * a.stderr for a in alpha], fmt="s--",
                        color="C1", capsize=2, label=r"$\sqrt{n}\,\hat\alpha_n$ (quenched)")
        ax.axhline(target, color="k", lw=0.8, ls=":", label=r"$\sqrt{2D}$")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("n")
        ax.set_ylabel("rescaled exponent per unit length")
        ax.legend(frameon=False)
        _save(fig, path)


def green_figure(path, table, eta):
    """Asymptotic ratio and -ln g / l against the separation l."""
    table = np.asarray(table, dtype=float)
    l, ratio, decay = table[:, 0], table[:, 2], table[:, 3]
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        ok = np.isfinite(ratio)
        ax0.plot(l[ok], ratio[ok], "o-", color="C0")
        ax0.set_xscale("log")
        ax0.set_xlabel("l")
        ax0.set_ylabel(r"$l^{-(d-1)/2} e^{-kl} / g$")
        ax1.plot(l, decay, "o-", color="C2")
        ax1.axhline(math.sqrt(2.0 * eta), color="k", lw=0.8, ls=":")
        ax1.set_xscale("log")
        ax1.set_xlabel("l")
        ax1.set_ylabel(r"$-\ln g / l$")
        _save(fig, path)


def environment_figure(path, a_over_n, alpha, bound):
    """Spread of a(n y)/n across environments."""
    vals = np.asarray(a_over_n, dtype=float)
    vals = vals[np.isfinite(vals)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(vals, bins=max(5, int(math.sqrt(vals.size))), color="0.7", edgecolor="0.3", lw=0.4)
        ax.axvline(alpha, color="C0", label="mean")
        if bound is not None:
            ax.axvline(bound, color="k", ls=":", label="upper bound")
        ax.set_xlabel("a(n y) / n")
        ax.set_ylabel("environments")
        ax.legend(frameon=False)
        _save(fig, path)


def weight_figure(path, values, label):
    """Histogram of per-path -ln(weight) / n_dist."""
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(vals, bins=60, color="0.7", edgecolor="0.3", lw=0.4)
        ax.set_xlabel(label)
        ax.set_ylabel("paths")
        _save(fig, path)


def refinement_figure(path, points, extrapolated, exact):
    """Survival estimates against sqrt(dt) with the extrapolated value at dt = 0."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        h = [math.sqrt(dt) for dt, _ in points]
        ax.errorbar(h, [e.mean for _, e in points], yerr=[2 * e.stderr for _, e in points], fmt="o", color="C0",
                    capsize=2, label="estimate")
        if extrapolated is not None:
            ax.errorbar([0.0], [extrapolated.mean], yerr=[2 * extrapolated.stderr], fmt="D", color="C3",
                        capsize=2, label="extrapolated")
            ax.plot([0.0] + h, [extrapolated.mean] + [e.mean for _, e in points], color="C3", lw=0.6)
        if exact is not None:
            ax.axhline(exact, color="k", ls=":", lw=0.8, label="exact")
        ax.set_xlabel(r"$\sqrt{dt}$")
        ax.set_ylabel("e")
        ax.legend(frameon=False)
        _save(fig, path)


def bounds_figure(path, labels, t4, sz):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(labels))
        ax.bar(x - 0.18, t4, width=0.36, color="C0", label="first-moment bound")
        ax.bar(x + 0.18, sz, width=0.36, color="C1", label="eigenvalue bound")
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_ylabel("exponent per unit length")
        ax.legend(frameon=False)
        _save(fig, path)
