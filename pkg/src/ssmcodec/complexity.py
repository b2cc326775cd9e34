"""Counted multiply-accumulate estimates for every pipeline stage.

Counts follow the analytic formulas (conv: out_h * out_w * k^2 * cin * cout;
dense scan recurrence: 5 L D N + L D per direction, with its three input
projections counted as matmuls). Elementwise work (SiLU, LayerNorm,
gating) is not counted. These are estimates of our stages, not claims about
any other implementation.
"""

from __future__ import annotations

from .transforms import TransformConfig, _cam_widths, _ga_stages, _gs_stages, _ha_stages, _hs_stages


def conv_macs(out_h: int, out_w: int, kernel: int, cin: int, cout: int) -> int:
    return out_h * out_w * kernel * kernel * cin * cout


def scan_core_macs(tokens: int, d: int, n: int) -> int:
    """One direction of the selective recurrence: discretize + scan + readout."""
    return 5 * tokens * d * n + tokens * d


def _vss_macs(h: int, w: int, width: int, layers: int, cfg: TransformConfig) -> dict[str, int]:
    tokens = h * w
    hidden = cfg.expand * width
    n = cfg.state_dim
    dk = cfg.dw_kernel
    lin = tokens * width * hidden * 2 + tokens * hidden * width  # in, gate, out
    dw = tokens * hidden * dk * dk
    proj = 4 * (tokens * hidden * hidden + 2 * tokens * hidden * n)
    core = 4 * scan_core_macs(tokens, hidden, n)
    per_layer = {"linear": lin, "dwconv": dw, "scan_proj": proj, "scan_core": core}
    return {k: v * layers for k, v in per_layer.items()}


def _merge(total: dict[str, int], part: dict[str, int]) -> None:
    for k, v in part.items():
        total[k] = total.get(k, 0) + v


def count_macs(cfg: TransformConfig, height: int, width: int) -> dict[str, int | float]:
    """Per-stage MAC counts for one padded (height, width) encode+decode pass."""
    if height % cfg.total_stride or width % cfg.total_stride:
        raise ValueError(f"extents {height}x{width} must be multiples of {cfg.total_stride}")
    k = cfg.conv_kernel
    stages: dict[str, dict[str, int]] = {}

    h, w = height, width
    ga: dict[str, int] = {}
    for cin, cout, stride, layers in _ga_stages(cfg):
        h, w = h // stride, w // stride
        _merge(ga, {"conv": conv_macs(h, w, k, cin, cout)})
        _merge(ga, _vss_macs(h, w, cout, layers, cfg))
    stages["ga"] = ga
    hy, wy = h, w

    ha: dict[str, int] = {}
    for cin, cout, stride, layers in _ha_stages(cfg):
        h, w = h // stride, w // stride
        _merge(ha, {"conv": conv_macs(h, w, k, cin, cout)})
        _merge(ha, _vss_macs(h, w, cout, layers, cfg))
    stages["ha"] = ha

    hs: dict[str, int] = {}
    for cin, cout, stride, layers in _hs_stages(cfg):
        _merge(hs, _vss_macs(h, w, cin, layers, cfg))
        _merge(hs, {"conv": conv_macs(h, w, k, cin, cout)})  # adjoint-equivalent count
        h, w = h * stride, w * stride
    stages["hs"] = hs

    gs: dict[str, int] = {}
    h, w = hy, wy
    for cin, cout, stride, layers in _gs_stages(cfg):
        _merge(gs, _vss_macs(h, w, cin, layers, cfg))
        _merge(gs, {"conv": conv_macs(h, w, k, cin, cout)})
        h, w = h * stride, w * stride
    stages["gs"] = gs

    cam: dict[str, int] = {"linear": 0}
    tokens = hy * wy
    sc = cfg.slice_channels
    hidden_cam = cfg.cam_hidden
    for i in range(cfg.slices):
        cin_p, cin_r, _ = _cam_widths(cfg, i)
        cam["linear"] += tokens * (cin_p * hidden_cam + hidden_cam * 2 * sc)
        cam["linear"] += tokens * (cin_r * hidden_cam + hidden_cam * sc)
    stages["cam"] = cam

    out: dict[str, int | float] = {}
    scan_core = 0
    total = 0
    for name, parts in stages.items():
        stage_total = sum(parts.values())
        out[name] = stage_total
        scan_core += parts.get("scan_core", 0)
        total += stage_total
    out["scan_core"] = scan_core
    out["total"] = total
    out["per_pixel"] = total / float(height * width)
    return out


def macs_csv(cfg: TransformConfig, sizes: list[int]) -> str:
    """One CSV row per square input size."""
    cols = ["size", "ga", "ha", "hs", "gs", "cam", "scan_core", "total", "per_pixel"]
    lines = [",".join(cols)]
    for s in sizes:
        padded = s + (-s % cfg.total_stride)
        row = count_macs(cfg, padded, padded)
        cells = [str(s)] + [f"{row[c]:.1f}" if c == "per_pixel" else str(row[c]) for c in cols[1:]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
