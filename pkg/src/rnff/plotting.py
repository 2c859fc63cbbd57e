"""Figure rendering for the report paths of the CLI.

Everything draws onto the Agg backend and writes PNG files; nothing is shown
interactively. PNG metadata is stripped so reruns give identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "image.cmap": "viridis",
}

PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata=PNG_META)
    plt.close(fig)
    return path


def kernel_panels(path, xs, K_exact, K_approx, title=None):
    """True kernel, low-rank approximation and absolute error side by side."""
    extent = [xs[0], xs[-1], xs[-1], xs[0]] if len(xs) > 1 else None
    err = np.abs(K_approx - K_exact)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), constrained_layout=True)
        for ax, M, name in zip(axes, (K_exact, K_approx, err),
                               ("true kernel", "approximation", "absolute error")):
            im = ax.imshow(M, extent=extent, interpolation="nearest")
            ax.set_title(name)
            ax.set_xlabel("x'")
            fig.colorbar(im, ax=ax, shrink=0.8)
        axes[0].set_ylabel("x")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def spectral_panels(path, frequencies, S):
    """Real part, imaginary part and modulus of the sampled spectral density."""
    w = np.asarray(frequencies)
    extent = [w[0], w[-1], w[-1], w[0]]
    S = np.asarray(S, dtype=complex)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), constrained_layout=True)
        for ax, M, name in zip(axes, (S.real, S.imag, np.abs(S)), ("Re s", "Im s", "|s|")):
            im = ax.imshow(M, extent=extent, interpolation="nearest", cmap="RdBu_r"
                           if name != "|s|" else "viridis")
            ax.set_title(name)
            ax.set_xlabel("omega'")
            fig.colorbar(im, ax=ax, shrink=0.8)
        axes[0].set_ylabel("omega")
        return _save(fig, path)


def ablation_figure(path, rows):
    """Relative RSSE against m (top) and omega_max (bottom), one line per n."""
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, 1, figsize=(5, 6), constrained_layout=True)
        for ax, var, label in zip(axes, ("m", "omega_max"), ("m", "cutoff omega_max")):
            sub = [r for r in rows if r[0] == var]
            for n in sorted({r[1] for r in sub}):
                pts = sorted((r[2], r[3]) for r in sub if r[1] == n)
                if pts:
                    ax.semilogy(*zip(*pts), marker="o", label=f"n = {n}")
            ax.set_xlabel(label)
            ax.set_ylabel("relative RSSE")
            if sub:
                ax.legend()
        return _save(fig, path)


def paths_figure(path, xs, Z):
    Z = np.atleast_2d(Z)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 3), constrained_layout=True)
        for k, z in enumerate(Z[:20]):
            ax.plot(xs, np.real(z), lw=0.9, label=f"path {k}" if k < 5 else None)
        ax.set_xlabel("x")
        ax.set_ylabel("Z(x)")
        if len(Z):
            ax.legend(loc="upper right")
        return _save(fig, path)


def posterior_figure(path, xs_test, panels, x_train=None, z_train=None, reference=None):
    """One panel per ``(label, mean, var)``, each with +-2 sd bands.

    ``reference`` is an optional ``(mean, var)`` drawn dashed in every panel.
    """
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.2),
                                 sharey=True, constrained_layout=True, squeeze=False)
        for ax, (label, mean, var) in zip(axes[0], panels):
            sd = np.sqrt(np.clip(var, 0, None))
            ax.plot(xs_test, mean, color="C0", label="mean")
            ax.fill_between(xs_test, mean - 2 * sd, mean + 2 * sd, color="C0", alpha=0.25)
            if reference is not None:
                rm, rv = reference
                rs = np.sqrt(np.clip(rv, 0, None))
                ax.plot(xs_test, rm, "k--", lw=0.8, label="true")
                ax.plot(xs_test, rm - 2 * rs, "k:", lw=0.6)
                ax.plot(xs_test, rm + 2 * rs, "k:", lw=0.6)
            if x_train is not None:
                ax.plot(x_train, z_train, "k.", ms=3)
            ax.set_title(label)
            ax.set_xlabel("x")
        axes[0][0].legend(loc="upper right")
        return _save(fig, path)


def loss_figure(path, history):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3), constrained_layout=True)
        ax.plot(np.arange(len(history)), history, lw=0.8)
        ax.set_xlabel("iteration")
        ax.set_ylabel("negative log marginal likelihood")
        return _save(fig, path)
