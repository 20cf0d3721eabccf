"""Batch command-line front end.

Every command accepts ``--config FILE`` with flat ``key=value`` lines
(keys are option names, ``-`` or ``_`` both accepted); explicit flags
override the file. The resolved settings are written to ``run_config.txt``
beside the outputs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import features as feat
from .errors import PrivSpeechError
from .mcadams import McAdamsConfig, anonymize_utterance
from .metrics import (
    ConfusionCounts,
    SegmentAnnotation,
    TrialScore,
    der,
    eer,
    mcc,
    read_rttm,
    tokenize,
    weighted_average,
    wer,
    write_rttm,
)
from .seeding import derive_seed
from .signal_io import read_wav, require_rate, write_wav
from .simulator import assign_meetings, load_pool, plan_meeting, render_meeting

log = logging.getLogger("privspeech")

OUT_ENV = "PRIVSPEECH_OUT_DIR"
RUN_CONFIG = "run_config.txt"


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"config line {n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _load_config(ctx, param, value):
    if value is None:
        return None
    # keys may be parameter names or long option names (``format`` for ``fmt``)
    aliases = {}
    for p in ctx.command.params:
        aliases[p.name] = p.name
        for opt in getattr(p, "opts", []):
            if opt.startswith("--"):
                aliases[opt[2:].replace("-", "_")] = p.name
    raw = parse_config(Path(value).read_text())
    unknown = set(raw) - set(aliases)
    if unknown:
        raise click.BadParameter(f"unknown key(s) {sorted(unknown)}", param=param)
    values = {aliases[k]: v for k, v in raw.items()}
    for p in ctx.command.params:
        if p.name in values and (getattr(p, "multiple", False) or p.nargs != 1):
            values[p.name] = values[p.name].split()
    ctx.default_map = {**(ctx.default_map or {}), **values}
    return value


config_option = click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="Flat key=value file with defaults for this command.",
)


def _default_out(name: str) -> str:
    return os.environ.get(OUT_ENV, os.path.join("privspeech_out", name))


def write_run_config(out_dir: Path, params: dict) -> None:
    lines = []
    for key in sorted(params):
        value = params[key]
        if isinstance(value, (list, tuple)):
            value = " ".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    (out_dir / RUN_CONFIG).write_text("\n".join(lines) + "\n")


def _run_parallel(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


class _Group(click.Group):
    """Reports library errors as a one-line message with exit status 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except PrivSpeechError as exc:
            raise click.ClickException(str(exc)) from exc


def _finish(n_ok: int, n_total: int) -> None:
    if n_ok < n_total:
        log.error("%d of %d item(s) failed", n_total - n_ok, n_total)
        sys.exit(1)


@click.group(cls=_Group)
@click.option("--log-level", default="WARNING", show_default=True)
def main(log_level):
    """Privacy-preserving speech feature and evaluation toolkit."""
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------


def _featurize_one(job):
    src, dst, variant, n_mels, fmt = job
    try:
        signal = require_rate(read_wav(src))
        fm = feat.extract(signal, variant, n_mels)
        (feat.write_features_csv if fmt == "csv" else feat.write_features_bin)(dst, fm)
        return {"input": src, "output": dst, "status": "ok", "rows": fm.shape[0], "cols": fm.shape[1],
                "variant": variant, "frame_hop_s": fm.frame_hop_s}
    except (PrivSpeechError, OSError) as exc:
        log.error("%s: %s", src, exc)
        return {"input": src, "output": "", "status": f"error: {exc}", "rows": 0, "cols": 0,
                "variant": variant, "frame_hop_s": ""}


@main.command()
@config_option
@click.argument("inputs", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--variant", type=click.Choice(feat.VARIANTS), default="standard", show_default=True)
@click.option("--n-mels", type=int, default=80, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "bin"]), default="bin", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=lambda: _default_out("features"))
@click.option("--jobs", type=int, default=1, show_default=True)
def featurize(inputs, variant, n_mels, fmt, out, jobs):
    """Log Mel features (standard or olMEGA) for each input WAV."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_config(out_dir, click.get_current_context().params)
    ext = "csv" if fmt == "csv" else "feat"
    jobs_list = [
        (src, str(out_dir / f"{Path(src).stem}.{variant}{n_mels}.{ext}"), variant, n_mels, fmt) for src in inputs
    ]
    rows = _run_parallel(_featurize_one, jobs_list, jobs)
    with open(out_dir / "featurize_summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, ["input", "output", "status", "rows", "cols", "variant", "frame_hop_s"])
        writer.writeheader()
        writer.writerows(rows)
    _finish(sum(r["status"] == "ok" for r in rows), len(rows))


# ---------------------------------------------------------------------------
# anonymize
# ---------------------------------------------------------------------------

MANIFEST_FIELDS = ["input_path", "output_path", "alpha_used", "seed", "group"]


def _anonymize_one(job):
    src, dst, seed, group, cfg = job
    try:
        signal = require_rate(read_wav(src))
        out, alpha = anonymize_utterance(signal, cfg, np.random.default_rng(seed))
        write_wav(dst, out)
        return {"input_path": src, "output_path": dst, "alpha_used": repr(alpha), "seed": seed, "group": group}
    except (PrivSpeechError, OSError) as exc:
        log.error("%s: %s", src, exc)
        return None


def _read_groups(path) -> dict[str, str]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"path", "meeting_id"} <= set(reader.fieldnames or []):
            raise click.BadParameter("group file needs 'path' and 'meeting_id' columns")
        return {str(Path(row["path"])): row["meeting_id"] for row in reader}


@main.command()
@config_option
@click.argument("inputs", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--alpha-range", type=(float, float), default=(0.5, 0.9), show_default=True)
@click.option("--fixed-alpha", type=float, default=None, help="Use this alpha everywhere (debug).")
@click.option("--scope", type=click.Choice(["utterance", "meeting"]), default="utterance", show_default=True)
@click.option("--groups", type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV with path,meeting_id; files of one meeting share an alpha (meeting scope).")
@click.option("--lpc-order", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=lambda: _default_out("anonymized"))
@click.option("--jobs", type=int, default=1, show_default=True)
def anonymize(inputs, alpha_range, fixed_alpha, scope, groups, lpc_order, seed, out, jobs):
    """McAdams anonymization with one random alpha per utterance or meeting."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_config(out_dir, click.get_current_context().params)
    if fixed_alpha is not None:
        alpha_range = (fixed_alpha, fixed_alpha)
    cfg = McAdamsConfig(alpha_range=tuple(alpha_range), lpc_order=lpc_order, seed=seed)

    if scope == "meeting":
        mapping = _read_groups(groups) if groups else {}
        keys = [mapping.get(str(Path(src)), str(Path(src))) for src in inputs]
    else:
        keys = [str(i) for i in range(len(inputs))]
    order = list(dict.fromkeys(keys))
    seeds = {k: derive_seed(seed, i) for i, k in enumerate(order)}

    jobs_list = [
        (src, str(out_dir / f"{i:05d}_{Path(src).stem}_anon.wav"), seeds[key], key, cfg)
        for i, (src, key) in enumerate(zip(inputs, keys))
    ]
    rows = _run_parallel(_anonymize_one, jobs_list, jobs)
    with open(out_dir / "anonymize_manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(r for r in rows if r is not None)
    _finish(sum(r is not None for r in rows), len(rows))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _simulate_one(job):
    k, pool, group, seed, gap_range, gain_db, out_dir = job
    meeting_id = f"meeting_{k:03d}"
    try:
        plan = plan_meeting(pool.subset(group), len(group), np.random.default_rng(seed), meeting_id, gap_range)
        audio, annotation = render_meeting(plan, pool, normalize_gain_db=gain_db)
        write_wav(out_dir / f"{meeting_id}.wav", audio)
        write_rttm(annotation, out_dir / f"{meeting_id}.rttm")
    except (PrivSpeechError, OSError) as exc:
        log.error("%s: %s", meeting_id, exc)
        return None
    return plan.to_json(seed)


@main.command()
@config_option
@click.argument("pool_manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-meetings", type=int, default=1, show_default=True)
@click.option("--gap-range", type=(float, float), default=(0.1, 2.0), show_default=True)
@click.option("--threshold-db", type=float, default=40.0, show_default=True)
@click.option("--min-voiced-ms", type=float, default=100.0, show_default=True)
@click.option("--normalize-gain-db", type=float, default=None, help="Rescale utterances to this RMS (dBFS).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=lambda: _default_out("meetings"))
@click.option("--jobs", type=int, default=1, show_default=True)
def simulate(pool_manifest, n_meetings, gap_range, threshold_db, min_voiced_ms, normalize_gain_db, seed, out, jobs):
    """Simulated 3-4 speaker meetings (WAV + RTTM + JSONL manifest)."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_config(out_dir, click.get_current_context().params)
    pool = load_pool(pool_manifest, threshold_db, min_voiced_ms)
    groups = assign_meetings(pool, n_meetings, np.random.default_rng(derive_seed(seed, 0)))
    jobs_list = [
        (k, pool, group, derive_seed(seed, k + 1), tuple(gap_range), normalize_gain_db, out_dir)
        for k, group in enumerate(groups)
    ]
    records = _run_parallel(_simulate_one, jobs_list, jobs)
    with open(out_dir / "meetings.jsonl", "w") as fh:
        for rec in records:
            if rec is not None:
                fh.write(json.dumps(rec) + "\n")
    _finish(sum(r is not None for r in records), len(records))


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def _emit(rows: list[dict], fields: list[str], output: str, params: dict) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if output == "-":
        click.echo(buf.getvalue(), nl=False)
    else:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue())
        write_run_config(path.parent, params)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def read_transcripts(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" in line:
                utt, text = line.split("\t", 1)
            else:
                utt, _, text = line.partition(" ")
            if utt in out:
                raise click.ClickException(f"{path}:{n}: duplicate utterance id {utt}")
            out[utt] = text
    return out


def read_trials(path) -> list[TrialScore]:
    trials = []
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 or parts[0] not in ("target", "nontarget"):
                raise click.ClickException(f"{path}:{n}: expected '<target|nontarget> <score>'")
            trials.append(TrialScore(parts[0] == "target", float(parts[1])))
    return trials


def read_labels(path) -> list[int]:
    tokens = Path(path).read_text().split()
    if any(t not in ("0", "1") for t in tokens):
        raise click.ClickException(f"{path}: labels must be 0 or 1")
    return [int(t) for t in tokens]


def _parse_weights(weights, n):
    if weights is None:
        return None
    w = [float(v) for v in weights.split(",")]
    if len(w) != n:
        raise click.BadParameter(f"{len(w)} weights for {n} sets")
    return w


output_option = click.option("-o", "--output", default="-", show_default=True, help="CSV report path ('-' = stdout).")


@main.group()
def score():
    """Evaluation scorers writing CSV reports."""


@score.command("wer")
@config_option
@click.argument("ref", type=click.Path(exists=True, dir_okay=False))
@click.argument("hyp", type=click.Path(exists=True, dir_okay=False))
@click.option("--casefold/--no-casefold", default=True, show_default=True)
@click.option("--strip-punct", is_flag=True, default=False)
@output_option
def score_wer(ref, hyp, casefold, strip_punct, output):
    """WER from '<utt-id>\\t<text>' reference and hypothesis files."""
    refs, hyps = read_transcripts(ref), read_transcripts(hyp)
    rows, total = [], None
    for utt, text in refs.items():
        r = tokenize(text, casefold, strip_punct)
        h = tokenize(hyps.get(utt, ""), casefold, strip_punct)
        if utt not in hyps:
            log.warning("no hypothesis for %s, scoring as empty", utt)
        b = wer(r, h)
        total = b if total is None else total + b
        rows.append({"set": utt, "n_tok": b.n_tok, "n_sub": b.n_sub, "n_ins": b.n_ins, "n_del": b.n_del,
                     "wer": _fmt(b.wer)})
    rows.append({"set": "ALL", "n_tok": total.n_tok, "n_sub": total.n_sub, "n_ins": total.n_ins,
                 "n_del": total.n_del, "wer": _fmt(total.wer)})
    _emit(rows, ["set", "n_tok", "n_sub", "n_ins", "n_del", "wer"], output, click.get_current_context().params)


@score.command("eer")
@config_option
@click.argument("trial_files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--weights", default=None, help="Comma-separated per-set weights; adds a weighted-average row.")
@output_option
def score_eer(trial_files, weights, output):
    """EER per '<target|nontarget> <score>' trial file."""
    w = _parse_weights(weights, len(trial_files))
    rows, values = [], []
    for path in trial_files:
        trials = read_trials(path)
        rate, theta = eer(trials)
        values.append(rate)
        rows.append({"set": path, "n_target": sum(t.is_target for t in trials),
                     "n_nontarget": sum(not t.is_target for t in trials), "eer": _fmt(rate),
                     "threshold": repr(theta), "weight": "" if w is None else w[len(values) - 1]})
    if w is not None:
        rows.append({"set": "AVG_W", "eer": _fmt(weighted_average(values, w))})
    _emit(rows, ["set", "n_target", "n_nontarget", "eer", "threshold", "weight"], output,
          click.get_current_context().params)


@score.command("mcc")
@config_option
@click.argument("ref", type=click.Path(exists=True, dir_okay=False))
@click.argument("hyp", type=click.Path(exists=True, dir_okay=False))
@output_option
def score_mcc(ref, hyp, output):
    """MCC of whitespace-separated 0/1 frame labels."""
    c = ConfusionCounts.from_labels(read_labels(ref), read_labels(hyp))
    rows = [{"set": "ALL", "tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn, "mcc": _fmt(mcc(c))}]
    _emit(rows, ["set", "tp", "tn", "fp", "fn", "mcc"], output, click.get_current_context().params)


@score.command("der")
@config_option
@click.argument("ref", type=click.Path(exists=True, dir_okay=False))
@click.argument("hyp", type=click.Path(exists=True, dir_okay=False))
@click.option("--collar", type=float, default=0.25, show_default=True, help="Forgiveness collar in seconds.")
@click.option("--overlap", type=click.Choice(["include", "exclude"]), default="include", show_default=True)
@output_option
def score_der(ref, hyp, collar, overlap, output):
    """DER per file id of two RTTM files, plus a pooled ALL row."""
    refs, hyps = read_rttm(ref), read_rttm(hyp)
    rows, total = [], None
    for file_id in sorted(refs):
        b = der(refs[file_id], hyps.get(file_id, SegmentAnnotation([], file_id)), collar, overlap == "include")
        total = b if total is None else total + b
        rows.append({"set": file_id, "fa_s": _fmt(b.fa_s), "miss_s": _fmt(b.miss_s), "error_s": _fmt(b.error_s),
                     "total_s": _fmt(b.total_s), "der": _fmt(b.der)})
    if total is None:
        raise click.ClickException(f"{ref}: no SPEAKER lines")
    rows.append({"set": "ALL", "fa_s": _fmt(total.fa_s), "miss_s": _fmt(total.miss_s),
                 "error_s": _fmt(total.error_s), "total_s": _fmt(total.total_s), "der": _fmt(total.der)})
    _emit(rows, ["set", "fa_s", "miss_s", "error_s", "total_s", "der"], output, click.get_current_context().params)


@score.command("wavg")
@config_option
@click.argument("table", type=click.Path(exists=True, dir_okay=False))
@output_option
def score_wavg(table, output):
    """Weighted average of a 'set,value,weight' CSV (e.g. per-set EERs)."""
    with open(table, newline="") as fh:
        data = list(csv.DictReader(fh))
    values = [float(r["value"]) for r in data]
    weights = [float(r["weight"]) for r in data]
    rows = [{"set": r["set"], "value": r["value"], "weight": r["weight"]} for r in data]
    rows.append({"set": "AVG_W", "value": f"{weighted_average(values, weights):.4f}", "weight": ""})
    _emit(rows, ["set", "value", "weight"], output, click.get_current_context().params)


if __name__ == "__main__":
    main()
