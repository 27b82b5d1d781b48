"""
=================
gridtune.plotting
=================

Line plots of sweep and simulation results written as SVG files.
"""
import pathlib

import numpy as np
from matplotlib import rc
import matplotlib as mpl
import matplotlib.style  # noqa: F401  (submodule must be imported explicitly)
from matplotlib.figure import Figure

_STYLE_FILE = pathlib.Path(__file__).parent / "data" / "matplotlib_style.rc"

_LABELS = {
    "nu": r"$\nu$",
    "delta": r"$\delta$",
    "k_p_over_k_omega": r"$k_p / k_\omega$",
    "lambda_n": r"$\lambda_n$",
}


def set_style(latex=False):
    """
    Sets matplotlib style to the style file shipped with the package.

    Args:
        latex: Whether or not to use latex to render text.
    """
    mpl.style.use(str(_STYLE_FILE))
    rc("text", usetex=latex)


def _save(figure, path):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg", metadata={"Date": None})
    return path


def plot_sweep(dataset, path):
    """
    Plot the squared :math:`H_2` norms of iDroop and droop control over the
    swept parameter.

    Args:
        dataset: ``xarray.Dataset`` from :py:func:`gridtune.tuning.sweep`.
        path: The output SVG file.

    Returns:
        The path of the written file.
    """
    set_style()
    axis = dataset.attrs["axis"]
    x = dataset[axis].data

    figure = Figure()
    ax = figure.add_subplot(1, 1, 1)
    ax.plot(x, dataset["h2_idroop"].data, label="iDroop")
    ax.plot(x, dataset["h2_droop"].data, ls="--", label="Droop")
    if axis == "delta" and np.all(x > 0):
        ax.set_xscale("log")
    ax.set_xlabel(_LABELS.get(axis, axis))
    ax.set_ylabel(r"$\|G\|_{H_2}^2$")
    ax.legend()
    figure.tight_layout()
    return _save(figure, path)


def plot_peak_envelopes(trajectories, path):
    """
    Plot the peak absolute frequency deviation of delayed simulations.

    Args:
        trajectories: Dictionary mapping labels to the ``trajectory``
            datasets of ``DelayedResult`` objects.
        path: The output SVG file.

    Returns:
        The path of the written file.
    """
    set_style()
    figure = Figure()
    ax = figure.add_subplot(1, 1, 1)
    for label, trajectory in trajectories.items():
        peaks = np.maximum(trajectory["peak_abs_omega"].data, 1e-300)
        ax.plot(trajectory["time"].data, peaks, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("Time [s]")
    ax.set_ylabel(r"$\max_i |\omega_i|$")
    ax.legend()
    figure.tight_layout()
    return _save(figure, path)
