"""HTML report generation from NDJSON audit logs.

The report (report.html) has summary tables up front, built from the
training progress, metrics and benchmark events, followed by the complete
event trace, collapsible for debugging.
"""

from __future__ import annotations

import html
import json
from pathlib import Path
from typing import Optional

from .errors import StorageError

_MAX_LEN = 8000  # chars to show per event payload before truncating in HTML
_MAX_CURVE_ROWS = 200


# =============================================================================
# Public API
# =============================================================================

def generate_report(log_path: Path, report_path: Path) -> None:
    """Read *log_path* (NDJSON) and write the HTML report to *report_path*."""
    events = _load_events(Path(log_path))
    try:
        Path(report_path).write_text(_render(events), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write report {report_path}: {exc}") from exc


# =============================================================================
# Helpers
# =============================================================================

def _load_events(path: Path) -> list[dict]:
    events = []
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    try:
                        events.append(json.loads(line))
                    except json.JSONDecodeError:
                        pass
    except OSError as exc:
        raise StorageError(f"cannot read audit log {path}: {exc}") from exc
    return events


def _e(text: object) -> str:
    return html.escape(str(text), quote=True)


def _ts(ts: str) -> str:
    try:
        t = ts.split("T")[1][:8]
        return f'<span class="ts">{_e(t)}</span>'
    except (IndexError, AttributeError):
        return ""


def _trunc(text: str) -> tuple[str, bool]:
    """Return (text, was_truncated)."""
    s = str(text)
    if len(s) <= _MAX_LEN:
        return s, False
    return s[:_MAX_LEN], True


def _num(value: object, digits: int = 4) -> str:
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return _e(value)


def _table(header: list[str], rows: list[list[object]]) -> str:
    head = "".join(f"<th>{_e(h)}</th>" for h in header)
    body = "".join("<tr>" + "".join(f"<td>{_num(v)}</td>" for v in row) + "</tr>" for row in rows)
    return f'<table class="data-table"><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>'


# =============================================================================
# Event renderers
# =============================================================================

_EVENT_STYLE = {
    "run_start": ("▶", "ev-start"),
    "run_complete": ("✅", "ev-done"),
    "run_error": ("❌", "ev-error"),
    "train_progress": ("📉", "ev-progress"),
    "checkpoint": ("💾", "ev-checkpoint"),
    "metrics": ("📊", "ev-metrics"),
    "fusion": ("🔗", "ev-metrics"),
    "gradcheck": ("🧮", "ev-metrics"),
    "benchmark_run": ("🏃", "ev-progress"),
    "benchmark_summary": ("🏁", "ev-done"),
    "node_start": ("⏵", "ev-node"),
    "node_end": ("⏹", "ev-node"),
    "node_error": ("❌", "ev-error"),
}


def _render_event(ev: dict) -> str:
    etype = ev.get("type", "unknown")
    icon, css = _EVENT_STYLE.get(etype, ("•", "ev-other"))
    data = ev.get("data", {})
    payload, was_cut = _trunc(json.dumps(data, indent=2, sort_keys=True))
    trunc_note = '<div class="truncated">⚠ truncated, see audit.ndjson for full content</div>' if was_cut else ""
    label = data.get("node") or data.get("command") or ""
    label_html = f"&nbsp;<code>{_e(label)}</code>" if label else ""
    return (
        f'<details class="ev {css}">'
        f'<summary>{icon} {_e(etype)}{label_html}&nbsp;{_ts(ev.get("ts", ""))}</summary>'
        f'<div class="inner"><pre class="code-block">{_e(payload)}</pre>{trunc_note}</div>'
        f'</details>'
    )


def _render_events(events: list[dict]) -> str:
    return "\n".join(_render_event(ev) for ev in events) or '<p class="empty">No events recorded.</p>'


# =============================================================================
# Summary sections
# =============================================================================

def _training_section(events: list[dict]) -> Optional[str]:
    rows = [e["data"] for e in events if e.get("type") == "train_progress"]
    if not rows:
        return None
    step = max(1, len(rows) // _MAX_CURVE_ROWS)
    shown = rows[::step]
    if shown[-1] is not rows[-1]:
        shown.append(rows[-1])
    table = _table(
        ["iteration", "loss_total", "loss_writer", "loss_aux", "lambda"],
        [[r.get("iteration"), r.get("loss_total"), r.get("loss_writer"), r.get("loss_aux"), r.get("current_lambda")]
         for r in shown],
    )
    return (
        f'<section class="card" id="training"><h2>Training curve '
        f'<span class="badge badge-slate">{len(rows)} logged iterations</span></h2>{table}</section>'
    )


def _metrics_section(events: list[dict]) -> Optional[str]:
    metrics = [e["data"] for e in events if e.get("type") == "metrics"]
    if not metrics:
        return None
    parts = []
    for m in metrics:
        label = " ".join(f"{k}={m[k]}" for k in ("mode", "seed") if k in m)
        rows = [["writer", "top1", m.get("top1")], ["writer", "top5", m.get("top5")]]
        rows += [["aux", k, v] for k, v in sorted((m.get("aux") or {}).items())]
        fusion = m.get("fusion") or {}
        fusion_html = ""
        if fusion:
            fusion_html = '<div class="label">Fusion</div>' + _table(
                ["N", "top1"], [[n, v] for n, v in sorted(fusion.items(), key=lambda kv: int(kv[0]))]
            )
        title = f'<div class="label">{_e(label)}</div>' if label else ""
        parts.append(f'<div class="metric-block">{title}{_table(["task", "metric", "value"], rows)}{fusion_html}</div>')
    return f'<section class="card" id="metrics"><h2>Metrics</h2>{"".join(parts)}</section>'


def _benchmark_section(events: list[dict]) -> Optional[str]:
    summary = next((e["data"] for e in reversed(events) if e.get("type") == "benchmark_summary"), None)
    if summary is None:
        return None
    modes = summary.get("modes", {})
    table = _table(
        ["mode", "median top1", "median top5", "fused (min N)", "fused (max N)"],
        [[m, v.get("median_top1"), v.get("median_top5"), v.get("median_fused_lo"), v.get("median_fused_hi")]
         for m, v in sorted(modes.items())],
    )
    checks = "".join(
        f'<li class="{"pass" if ok else "fail"}">{"✔" if ok else "✘"} {_e(name)}</li>'
        for name, ok in sorted(summary.get("checks", {}).items())
    )
    return (
        f'<section class="card" id="benchmark"><h2>Benchmark '
        f'<span class="badge badge-slate">chance {_num(summary.get("chance"))}</span></h2>'
        f'{table}<ul class="checks">{checks}</ul></section>'
    )


# =============================================================================
# Top-level renderer
# =============================================================================

def _render(events: list[dict]) -> str:
    start_ev = next((e for e in events if e.get("type") == "run_start"), None)
    done_ev = next((e for e in events if e.get("type") == "run_complete"), None)
    error_ev = next((e for e in events if e.get("type") == "run_error"), None)

    command = "run"
    meta_rows = ""
    if start_ev:
        d = start_ev.get("data", {})
        command = d.get("command", command)
        for key, val in sorted(d.items()):
            if key != "command":
                meta_rows += f"<tr><td>{_e(key)}</td><td>{_e(val)}</td></tr>"
        meta_rows += f"<tr><td>started</td><td>{_e(start_ev.get('ts', '')[:19].replace('T', ' '))} UTC</td></tr>"
    if done_ev:
        secs = int(done_ev.get("data", {}).get("duration_s", 0))
        m, s = divmod(secs, 60)
        meta_rows += f"<tr><td>duration</td><td>{m}m {s}s</td></tr>" if m else f"<tr><td>duration</td><td>{s}s</td></tr>"
    status = "failed" if error_ev else ("complete" if done_ev else "incomplete")

    nav_parts = ['<a class="nav-item" href="#summary">📊 Summary</a>']
    section_parts = [
        f'<section class="card header-card" id="summary">'
        f'<h1>deepadapt {_e(command)}</h1>'
        f'<p class="run-status">Status: {_e(status)}</p>'
        f'<table class="meta-table"><tbody>{meta_rows}</tbody></table>'
        f'</section>'
    ]
    for sid, title, builder in (
        ("training", "📉 Training", _training_section),
        ("metrics", "📊 Metrics", _metrics_section),
        ("benchmark", "🏁 Benchmark", _benchmark_section),
    ):
        section = builder(events)
        if section:
            nav_parts.append(f'<a class="nav-item" href="#{sid}">{title}</a>')
            section_parts.append(section)

    nav_parts.append('<div class="nav-group-title">Trace</div>')
    nav_parts.append('<a class="nav-item" href="#trace">Event trace</a>')
    section_parts.append(
        f'<section class="card" id="trace">'
        f'<h2>Event trace <span class="badge badge-slate">{len(events)} events</span></h2>'
        f'<div class="section-controls">'
        f'<button class="btn-sm" onclick="expandSection(\'trace\')">Expand all</button>'
        f'<button class="btn-sm" onclick="collapseSection(\'trace\')">Collapse all</button>'
        f'</div>'
        f'{_render_events(events)}'
        f'</section>'
    )

    return _PAGE_TEMPLATE.format(
        title=_e(command),
        css=_CSS,
        js=_JS,
        nav="\n".join(nav_parts),
        body="\n".join(section_parts),
    )


# =============================================================================
# Assets
# =============================================================================

_CSS = """
:root {
  --blue:#3b82f6; --green:#10b981; --amber:#f59e0b;
  --cyan:#06b6d4; --red:#ef4444; --violet:#8b5cf6;
  --slate-100:#f1f5f9; --slate-900:#0f172a;
}
* { box-sizing: border-box; margin: 0; padding: 0; }
body { font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', sans-serif;
       background: var(--slate-100); color: #1e293b; line-height: 1.5; }

/* Layout */
.layout { display: flex; min-height: 100vh; }
.sidebar { width: 250px; min-width: 250px; background: var(--slate-900);
           color: #e2e8f0; padding: 1.25rem; position: sticky; top: 0;
           height: 100vh; overflow-y: auto; flex-shrink: 0; }
.main { flex: 1; padding: 2rem; max-width: 960px; }

/* Sidebar */
.sidebar .logo { font-size: 1rem; font-weight: 700; color: #f8fafc;
                 margin-bottom: 1.25rem; letter-spacing: .025em; }
.sidebar .logo span { color: var(--blue); }
.global-controls { display: flex; gap: .4rem; margin-bottom: 1.25rem; flex-wrap: wrap; }
.btn-global { padding: .2rem .6rem; border: 1px solid #334155; border-radius: 4px;
              background: #1e293b; color: #94a3b8; cursor: pointer; font-size: .75rem; }
.btn-global:hover { background: #334155; color: #f8fafc; }
.nav-group-title { font-size: .65rem; text-transform: uppercase; letter-spacing: .1em;
                   color: #64748b; margin: 1rem 0 .35rem; padding-left: .25rem; }
.nav-item { display: flex; align-items: center; gap: .5rem; padding: .35rem .6rem;
            color: #94a3b8; text-decoration: none; border-radius: 6px;
            font-size: .82rem; margin-bottom: 2px; }
.nav-item:hover, .nav-item.active { background: #1e293b; color: #f8fafc; }

/* Cards */
.card { background: #fff; border-radius: 10px; padding: 1.5rem;
        margin-bottom: 1.5rem; box-shadow: 0 1px 3px rgba(0,0,0,.08); }
.header-card { border-left: 4px solid var(--blue); }
.header-card h1 { font-size: 1.35rem; margin-bottom: .35rem; }
.run-status { font-size: .95rem; color: #475569; margin: .35rem 0 .75rem; }
.meta-table { border-collapse: collapse; font-size: .84rem; }
.meta-table td { padding: .2rem 1rem .2rem 0; color: #64748b; }
.meta-table td:first-child { font-weight: 600; color: #334155; }
.card h2 { font-size: 1rem; font-weight: 600; margin-bottom: .9rem;
           display: flex; align-items: center; gap: .5rem; }

/* Tables */
.data-table { border-collapse: collapse; font-size: .8rem; margin-bottom: .9rem; }
.data-table th { text-align: left; padding: .3rem .8rem; background: #f8fafc;
                 border-bottom: 1px solid #e2e8f0; color: #475569; }
.data-table td { padding: .25rem .8rem; border-bottom: 1px solid #f1f5f9;
                 font-family: 'SF Mono', Monaco, Consolas, monospace; }
.metric-block { margin-bottom: 1rem; }
.checks { list-style: none; font-size: .85rem; }
.checks .pass { color: #059669; }
.checks .fail { color: #dc2626; }

/* Collapsibles */
details { border: 1px solid #e2e8f0; border-radius: 8px; margin-bottom: .45rem; overflow: hidden; }
details summary { padding: .55rem 1rem; cursor: pointer; user-select: none;
                  font-size: .84rem; font-weight: 500; list-style: none;
                  display: flex; align-items: center; gap: .45rem; }
details summary::-webkit-details-marker { display: none; }
details summary::before { content: '▶'; font-size: .65rem; color: #94a3b8;
                           transition: transform .18s; flex-shrink: 0; }
details[open] summary::before { transform: rotate(90deg); }
details[open] summary { background: #f8fafc; border-bottom: 1px solid #e2e8f0; }
details .inner { padding: .9rem 1rem; }

/* Event border colours */
.ev-start summary      { border-left: 3px solid var(--blue); }
.ev-done summary       { border-left: 3px solid var(--green); }
.ev-progress summary   { border-left: 3px solid var(--cyan); }
.ev-checkpoint summary { border-left: 3px solid var(--amber); }
.ev-metrics summary    { border-left: 3px solid var(--violet); }
.ev-node summary       { border-left: 3px solid #94a3b8; }
.ev-error summary      { border-left: 3px solid var(--red); }

/* Code */
pre.code-block { background: #0f172a; color: #e2e8f0; padding: .9rem; border-radius: 6px;
                 font-family: 'SF Mono', Monaco, Consolas, monospace; font-size: .77rem;
                 overflow-x: auto; white-space: pre-wrap; word-break: break-word; }
.label { font-size: .72rem; text-transform: uppercase; letter-spacing: .07em;
         font-weight: 600; color: #64748b; margin-bottom: .4rem; }

/* Badges */
.badge { display: inline-block; padding: .1rem .5rem; border-radius: 9999px;
         font-size: .68rem; font-weight: 600; }
.badge-slate { background: #f1f5f9; color: #475569; }

/* Controls */
.section-controls { margin-bottom: .65rem; display: flex; gap: .4rem; }
.btn-sm { padding: .2rem .6rem; border: 1px solid #e2e8f0; border-radius: 4px;
          background: #fff; cursor: pointer; font-size: .77rem; color: #475569; }
.btn-sm:hover { background: #f1f5f9; }

/* Misc */
.ts { font-family: monospace; font-size: .68rem; color: #94a3b8; margin-left: auto; }
.truncated { color: #d97706; font-size: .7rem; margin-top: .3rem; }
.empty { color: #94a3b8; font-size: .875rem; font-style: italic; }
"""

_JS = """
function expandSection(id) {
  document.getElementById(id).querySelectorAll('details').forEach(d => d.open = true);
}
function collapseSection(id) {
  document.getElementById(id).querySelectorAll('details').forEach(d => d.open = false);
}
function expandAll() {
  document.querySelectorAll('details').forEach(d => d.open = true);
}
function collapseAll() {
  document.querySelectorAll('details').forEach(d => d.open = false);
}
"""

_PAGE_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <meta name="viewport" content="width=device-width, initial-scale=1">
  <title>Run Report: {title}</title>
  <style>{css}</style>
</head>
<body>
<div class="layout">
  <nav class="sidebar">
    <div class="logo">deep<span>adapt</span></div>
    <div class="global-controls">
      <button class="btn-global" onclick="expandAll()">Expand all</button>
      <button class="btn-global" onclick="collapseAll()">Collapse all</button>
    </div>
    {nav}
  </nav>
  <main class="main">
    {body}
  </main>
</div>
<script>{js}</script>
</body>
</html>"""
