"""Episode-trace figures: stacked panels with the comfort band shaded."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .envs import read_trace_csv  # noqa: E402


def plot_episode(trace_path, out_path, comfort_low: float = 21.0,
                 comfort_high: float = 25.0) -> int:
    """Render a trace CSV as stacked panels (vector graphics).

    Base traces get three panels (outdoor, indoor, heating power); traces
    with a nonzero price column get a fourth price panel.  Returns the
    panel count.
    """
    trace = read_trace_csv(trace_path)
    has_price = bool((trace["price_cent_per_wh"] != 0.0).any())
    n_panels = 4 if has_price else 3
    hours = trace["step"] * 900.0 / 3600.0

    fig, axes = plt.subplots(n_panels, 1, sharex=True, figsize=(10, 2.2 * n_panels))
    axes[0].plot(hours, trace["t_out"], color="tab:blue", lw=0.9)
    axes[0].set_ylabel("T_out [degC]")
    axes[1].axhspan(comfort_low, comfort_high, color="tab:green", alpha=0.15,
                    label=f"comfort [{comfort_low:g}, {comfort_high:g}]")
    axes[1].plot(hours, trace["t_in"], color="tab:red", lw=0.9, label="T_in")
    axes[1].plot(hours, trace["t_ret"], color="tab:orange", lw=0.7, alpha=0.7,
                 label="T_ret")
    axes[1].set_ylabel("T [degC]")
    axes[1].legend(loc="upper right", fontsize=7, ncol=3)
    axes[2].step(hours, trace["q_hp"] / 1000.0, where="post", color="tab:purple", lw=0.8)
    axes[2].set_ylabel("Q_hp [kW]")
    if has_price:
        axes[3].step(hours, trace["price_cent_per_wh"] * 1000.0, where="post",
                     color="tab:gray", lw=0.8)
        axes[3].set_ylabel("price [ct/kWh]")
    axes[-1].set_xlabel("hours")
    fig.align_ylabels(axes)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return n_panels


__all__ = ["plot_episode"]
