"""Command-line interface.

Every command writes ``manifest.json`` next to its outputs. The manifest
records the normalized arguments, a config snapshot, input digests and
output digests, so ``beta3irt replay`` can rerun it and check the outputs
byte for byte.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .core import Family, icc_2plnd, icc_beta3, icc_regime, BOUND_MARGIN
from .errors import (Beta3Error, DomainError, FamilyMismatch, FormatError, IndexOutOfRange, NumericalFailure,
                     ParseError, UnsupportedCombination)
from .evaluation import (HoldoutPlan, ability_noise_scan, classifier_metrics, compare_models,
                         flag_noisy_items, odds_ratio, METRIC_NAMES)
from .mle import MleConfig, fit_mle, predict
from .synth import (GeneratorSpec, PanelMember, PanelSpec, inject_label_noise, joint_response_matrix,
                    sample_dataset, simulate_classifier_panel, simulate_train_test_panels)
from .vi import AdamSettings, ViConfig, fit_vi, posterior_point_estimates

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST = "manifest.json"


def _snapshot(obj):
    """JSON-ready view of a config dataclass."""
    def conv(v):
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, Family):
            return v.value
        return v
    return conv(asdict(obj))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise NumericalFailure("fit produced non-finite values")


# simulate ---------------------------------------------------------------

def _field_position(text: str, name: str):
    m = re.search(r'"%s"\s*:' % re.escape(name), text)
    if not m:
        return None, None
    line = text.count("\n", 0, m.start()) + 1
    col = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1
    return line, col


def _fail(text, path, name, message):
    line, col = _field_position(text, name)
    raise ParseError(f"field {name!r}: {message}", path, line, col)


def _int_field(obj, text, path, name, default=None, minimum=1):
    v = obj.get(name, default)
    if v is None:
        _fail(text, path, name, "is required")
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        _fail(text, path, name, f"must be an integer >= {minimum}")
    return v


def _real_field(obj, text, path, name, default, lo, hi, lo_open=True, hi_open=False):
    v = obj.get(name, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        _fail(text, path, name, "must be a number")
    below = v <= lo if lo_open else v < lo
    above = v >= hi if hi_open else v > hi
    if below or above:
        _fail(text, path, name, f"must lie in {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")
    return float(v)


def _pair_field(obj, text, path, name, default, shape_pair=True):
    """A Beta shape pair (both > 0) or a (mean, sd >= 0) pair."""
    v = obj.get(name, default)
    ok = isinstance(v, (list, tuple)) and len(v) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x) for x in v)
    if ok:
        ok = (v[0] > 0 and v[1] > 0) if shape_pair else v[1] >= 0
    if not ok:
        _fail(text, path, name, "must be two positive numbers" if shape_pair else "must be [mean, sd >= 0]")
    return (float(v[0]), float(v[1]))


RESPONSE_FIELDS = {"type", "M", "N", "ability_prior", "difficulty_prior", "discrimination_prior",
                   "responses_per_pair", "observation_density", "seed"}
PANEL_FIELDS = {"type", "N", "train_N", "K", "noise_fraction", "noise_seed", "margin_scale", "noise_scale",
                "train_noise", "members", "seed"}


def _parse_spec(path):
    text = Path(path).read_text() if Path(path).exists() else None
    if text is None:
        raise FormatError("cannot open file", path)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path, e.lineno, e.colno) from None
    if not isinstance(obj, dict):
        raise ParseError("spec must be a JSON object", path, 1, 1)
    kind = obj.get("type", "responses")
    if kind not in ("responses", "panel"):
        _fail(text, path, "type", "must be 'responses' or 'panel'")
    allowed = RESPONSE_FIELDS if kind == "responses" else PANEL_FIELDS
    for key in obj:
        if key not in allowed:
            _fail(text, path, key, "unknown field")
    seed = _int_field(obj, text, path, "seed", 0, minimum=0)
    if kind == "responses":
        spec = GeneratorSpec(
            M=_int_field(obj, text, path, "M"),
            N=_int_field(obj, text, path, "N"),
            ability_prior=_pair_field(obj, text, path, "ability_prior", (1, 1)),
            difficulty_prior=_pair_field(obj, text, path, "difficulty_prior", (1, 1)),
            discrimination_prior=_pair_field(obj, text, path, "discrimination_prior", (1, 1),
                                             shape_pair=False),
            responses_per_pair=_int_field(obj, text, path, "responses_per_pair", 1),
            observation_density=_real_field(obj, text, path, "observation_density", 1.0, 0.0, 1.0),
            seed=seed,
        )
        return kind, spec
    members = obj.get("members")
    if members is not None:
        try:
            members = tuple(PanelMember(**m) for m in members)
        except (TypeError, ValueError) as e:
            _fail(text, path, "members", str(e))
    panel = PanelSpec(
        members=members if members is not None else PanelSpec().members,
        margin_scale=_real_field(obj, text, path, "margin_scale", 3.0, 0.0, np.inf, hi_open=True),
        noise_scale=_real_field(obj, text, path, "noise_scale", 2.0, 0.0, np.inf, lo_open=False, hi_open=True),
        train_noise=_real_field(obj, text, path, "train_noise", 0.0, 0.0, 0.5, lo_open=False, hi_open=True),
    )
    settings = {
        "N": _int_field(obj, text, path, "N"),
        "train_N": _int_field(obj, text, path, "train_N", 0, minimum=0),
        "K": _int_field(obj, text, path, "K", 2, minimum=2),
        "noise_fraction": _real_field(obj, text, path, "noise_fraction", 0.0, 0.0, 1.0, lo_open=False, hi_open=True),
        "noise_seed": _int_field(obj, text, path, "noise_seed", seed + 1, minimum=0),
        "seed": seed,
        "panel": panel,
    }
    return kind, settings


def cmd_simulate(args, out: Path):
    kind, spec = _parse_spec(args.spec)
    if kind == "responses":
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        data, truth = sample_dataset(spec)
        io.write_responses(data, out / "responses.csv")
        truth_obj = io.params_to_json(truth, data.respondent_ids, data.item_ids)
        truth_obj["generator"] = _snapshot(spec)
        io.write_json(truth_obj, out / "ground_truth.json")
        return _snapshot(spec), spec.seed
    if args.seed is not None:
        spec["seed"] = args.seed
    train = None
    if spec["train_N"] > 0:
        train, panel = simulate_train_test_panels(spec["train_N"], spec["N"], spec["K"], spec["panel"], spec["seed"])
        io.write_panel(train, out / "train_panel.csv")
    else:
        panel = simulate_classifier_panel(spec["N"], spec["K"], spec["panel"], spec["seed"])
    labels, flipped = inject_label_noise(panel.labels, spec["noise_fraction"], spec["K"], spec["noise_seed"])
    noisy = panel.with_labels(labels)
    io.write_panel(noisy, out / "panel.csv")
    io.write_responses(joint_response_matrix(noisy, train), out / "responses.csv")
    io.write_json({
        "format_version": io.FORMAT_VERSION,
        "instance_ids": list(panel.instance_ids),
        "clean_labels": [int(y) for y in panel.labels],
        "flipped": [panel.instance_ids[j] for j in np.flatnonzero(flipped)],
    }, out / "ground_truth.json")
    snap = {k: v for k, v in spec.items() if k != "panel"}
    snap["panel"] = _snapshot(spec["panel"])
    return snap, spec["seed"]


# fit / predict / icc ----------------------------------------------------

def _mle_config(args, family):
    return MleConfig(iterations=args.iterations, batch_size=args.batch_size, learning_rate=args.lr,
                     clip_epsilon=args.clip_eps, seed=args.seed, family=family)


def _vi_config(args):
    return ViConfig(outer_iterations=args.outer_iters, inner_max_steps=args.inner_steps,
                    mc_samples=args.mc_samples, sigma0=args.sigma0, clip_epsilon=args.clip_eps,
                    seed=args.seed, adam=AdamSettings(step_size=args.adam_step))


def cmd_fit(args, out: Path):
    family = Family(args.family)
    if args.method == "vi" and family is not Family.BETA3:
        raise UnsupportedCombination("variational inference is defined for the beta3 family only")
    data = io.read_responses(args.responses)
    if args.method == "mle":
        cfg = _mle_config(args, family)
        params, trace = fit_mle(data, cfg)
        _check_finite(params.abilities, params.difficulties, params.discriminations, trace)
        io.write_csv(out / "trace.csv", ["iteration", "loss"],
                     ([t + 1, float(v)] for t, v in enumerate(trace)))
    else:
        cfg = _vi_config(args)
        q = fit_vi(data, cfg)
        _check_finite(q.ability_mu, q.difficulty_mu, q.discrimination_mu,
                      q.ability_log_sigma, q.difficulty_log_sigma, q.discrimination_log_sigma)
        params = posterior_point_estimates(q)
        io.write_posteriors(q, data.respondent_ids, data.item_ids, out / "posteriors.json")
        io.write_csv(out / "trace.csv", ["outer_iteration", "local_elbo", "global_elbo"],
                     ([t + 1, float(a), float(b)] for t, (a, b) in enumerate(q.elbo_trace)))
    io.write_params(params, data.respondent_ids, data.item_ids, out / "params.json")
    return _snapshot(cfg), cfg.seed


def cmd_predict(args, out: Path):
    params, rids, iids = io.read_params(args.params)
    if args.family is not None and Family(args.family) is not params.family:
        raise FamilyMismatch(f"params are {params.family.value}, expected {args.family}")
    rindex = {r: i for i, r in enumerate(rids)}
    iindex = {j: i for i, j in enumerate(iids)}
    pairs = io.read_pairs(args.pairs)
    idx = []
    for n, (r, j) in enumerate(pairs, start=2):
        if r not in rindex:
            raise IndexOutOfRange(f"{args.pairs}:{n}: unknown respondent {r!r}")
        if j not in iindex:
            raise IndexOutOfRange(f"{args.pairs}:{n}: unknown item {j!r}")
        idx.append((rindex[r], iindex[j]))
    preds = predict(params, idx)
    with open(out / "predictions.csv", "w", newline="") as f:
        f.write("respondent_id,item_id,prediction\n")
        for (r, j), p in zip(pairs, preds):
            f.write(f"{r},{j},{p:.17g}\n")
    return {"family": params.family.value}, None


def _symmetric_grid(center, half_width, n):
    """n points on center +/- half_width; an odd n hits center exactly."""
    if n < 2:
        raise DomainError("--grid must be at least 2")
    k = np.arange(n, dtype=float)
    return center + half_width * ((2.0 * k - (n - 1)) / (n - 1))


def cmd_icc(args, out: Path):
    params, _, iids = io.read_params(args.params)
    if args.item not in iids:
        raise IndexOutOfRange(f"unknown item {args.item!r}")
    j = iids.index(args.item)
    delta = float(params.difficulties[j])
    a = float(params.discriminations[j])
    if params.family is Family.BETA3:
        grid = _symmetric_grid(0.5, 0.5 - BOUND_MARGIN, args.grid)
        grid[0], grid[-1] = BOUND_MARGIN, 1.0 - BOUND_MARGIN
        values = icc_beta3(grid, delta, a)
        regime = icc_regime(a).value
    else:
        grid = _symmetric_grid(delta, args.span, args.grid)
        values = icc_2plnd(grid, delta, a)
        regime = "logistic"
    values = np.atleast_1d(values)
    io.write_csv(out / "icc.csv", ["theta", "expected_response", "regime"],
                 ([float(t), float(v), regime] for t, v in zip(grid, values)))
    return {"item": args.item, "grid": args.grid, "difficulty": delta, "discrimination": a}, None


# evaluate ---------------------------------------------------------------

def cmd_compare(args, out: Path):
    plan = HoldoutPlan(repetitions=args.repetitions, seed=args.seed)
    cfg_a = _mle_config(args, Family.BETA3)
    cfg_b = _mle_config(args, Family.TWOPL_ND)
    stems = [Path(p).stem for p in args.responses]
    rows = []
    for k, path in enumerate(args.responses):
        name = stems[k] if stems.count(stems[k]) == 1 else f"{k}:{stems[k]}"
        rows.append(compare_models(io.read_responses(path), plan, cfg_a, cfg_b, alpha=args.alpha, name=name))
    io.write_csv(out / "compare.csv",
                 ["dataset", "beta3_mean", "beta3_std", "2plnd_mean", "2plnd_std",
                  "wilcoxon_statistic", "p_value", "significant", "beta3_better"],
                 ([r.dataset, r.mean_a, r.std_a, r.mean_b, r.std_b, float(r.statistic), r.p_value,
                   int(r.significant), int(r.a_wins)] for r in rows))
    io.write_csv(out / "compare_losses.csv", ["dataset", "repetition", "beta3_loss", "2plnd_loss"],
                 ([r.dataset, k, float(x), float(y)] for r in rows
                  for k, (x, y) in enumerate(zip(r.losses_a, r.losses_b))))
    cfg = {"plan": _snapshot(plan), "beta3": _snapshot(cfg_a), "2plnd": _snapshot(cfg_b), "alpha": args.alpha}
    return cfg, args.seed


def _train_panel(args, panel):
    if args.train_panel is None:
        return None
    train = io.read_panel(args.train_panel)
    if train.classifier_ids != panel.classifier_ids:
        raise FormatError("training panel lists different classifiers", args.train_panel)
    return train


def cmd_metrics(args, out: Path):
    panel = io.read_panel(args.panel)
    if args.posteriors:
        q, rids, _ = io.read_posteriors(args.posteriors)
        order = {r: i for i, r in enumerate(rids)}
        missing = [c for c in panel.classifier_ids if c not in order]
        if missing:
            raise FormatError(f"posteriors lack classifier {missing[0]!r}", args.posteriors)
        theta = posterior_point_estimates(q).abilities[[order[c] for c in panel.classifier_ids]]
        cfg = {"posteriors": "file"}
        seed = None
    else:
        vcfg = _vi_config(args)
        data = joint_response_matrix(panel, _train_panel(args, panel))
        q = fit_vi(data, vcfg)
        theta = posterior_point_estimates(q).abilities
        io.write_posteriors(q, data.respondent_ids, data.item_ids, out / "posteriors.json")
        cfg, seed = _snapshot(vcfg), vcfg.seed
    report = classifier_metrics(panel, theta)
    io.write_csv(out / "metrics.csv", ["classifier"] + list(METRIC_NAMES),
                 ([r.classifier] + [float(getattr(r, m)) for m in METRIC_NAMES] for r in report.rows))
    mat = report.spearman_matrix()
    io.write_csv(out / "spearman.csv", ["metric"] + list(METRIC_NAMES),
                 ([name] + [float(x) for x in row] for name, row in zip(METRIC_NAMES, mat)))
    return cfg, seed


def cmd_noise_scan(args, out: Path):
    panel = io.read_panel(args.panel)
    cfg = _vi_config(args)
    try:
        fractions = [float(x) for x in args.fractions.split(",")]
    except ValueError:
        raise FormatError(f"--fractions must be comma-separated numbers: {args.fractions!r}") from None
    rows = ability_noise_scan(panel, fractions, cfg, noise_seed=args.noise_seed, train=_train_panel(args, panel))
    io.write_csv(out / "noise_scan.csv", ["fraction", "classifier", "ability", "accuracy"],
                 ([r.fraction, r.classifier, r.ability, r.accuracy] for r in rows))
    return {"vi": _snapshot(cfg), "fractions": fractions, "noise_seed": args.noise_seed}, cfg.seed


def cmd_flag_noise(args, out: Path):
    q, _, iids = io.read_posteriors(args.posteriors)
    flagged = flag_noisy_items(q, args.threshold)
    io.write_csv(out / "flagged.csv", ["item_id", "discrimination_mean"],
                 ([iids[j], mu] for j, mu in flagged))
    summary = {"num_items": len(iids), "num_flagged": len(flagged), "threshold": args.threshold}
    if args.truth:
        truth = io.read_json(args.truth)
        if "flipped" not in truth:
            raise FormatError("ground truth lacks a 'flipped' list", args.truth)
        noisy = set(truth["flipped"])
        scored = set(truth.get("instance_ids", iids))
        keep = np.array([i in scored for i in iids])
        mask_truth = np.array([i in noisy for i in iids])[keep]
        mask_flag = np.zeros(len(iids), dtype=bool)
        mask_flag[[j for j, _ in flagged]] = True
        mask_flag = mask_flag[keep]
        summary.update({
            "num_scored": int(keep.sum()),
            "num_noisy": int(mask_truth.sum()),
            "flagged_noisy": int(np.sum(mask_flag & mask_truth)),
            "flagged_clean": int(np.sum(mask_flag & ~mask_truth)),
            "odds_ratio": odds_ratio(mask_flag, mask_truth),
        })
    io.write_json(summary, out / "flag_summary.json")
    return {"threshold": args.threshold}, None


# parser and driver -------------------------------------------------------

def _add_out(p):
    p.add_argument("--out", required=True, type=Path, help="output directory")


def _add_mle(p):
    p.add_argument("--iterations", type=int, default=MleConfig.iterations)
    p.add_argument("--batch-size", type=int, default=MleConfig.batch_size)
    p.add_argument("--lr", type=float, default=MleConfig.learning_rate)


def _add_vi(p):
    p.add_argument("--sigma0", type=float, default=ViConfig.sigma0)
    p.add_argument("--outer-iters", type=int, default=ViConfig.outer_iterations)
    p.add_argument("--inner-steps", type=int, default=ViConfig.inner_max_steps)
    p.add_argument("--mc-samples", type=int, default=ViConfig.mc_samples)
    p.add_argument("--adam-step", type=float, default=AdamSettings.step_size)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-eps", type=float, default=MleConfig.clip_epsilon)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beta3irt", description="Beta IRT for continuous responses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a JSON spec")
    p.add_argument("spec", type=Path)
    p.add_argument("--seed", type=int, default=None, help="overrides the spec seed")
    _add_out(p)
    p.set_defaults(run=cmd_simulate, inputs=("spec",))

    p = sub.add_parser("fit", help="fit a model to a responses CSV")
    p.add_argument("responses", type=Path)
    p.add_argument("--method", choices=("mle", "vi"), default="mle")
    p.add_argument("--family", choices=[f.value for f in Family], default=Family.BETA3.value)
    _add_common(p)
    _add_mle(p)
    _add_vi(p)
    _add_out(p)
    p.set_defaults(run=cmd_fit, inputs=("responses",))

    p = sub.add_parser("predict", help="expected responses for respondent/item pairs")
    p.add_argument("params", type=Path)
    p.add_argument("pairs", type=Path)
    p.add_argument("--family", choices=[f.value for f in Family], default=None,
                   help="fail unless the params have this family")
    _add_out(p)
    p.set_defaults(run=cmd_predict, inputs=("params", "pairs"))

    p = sub.add_parser("icc", help="tabulate one item's characteristic curve")
    p.add_argument("params", type=Path)
    p.add_argument("--item", required=True)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--span", type=float, default=6.0, help="half-width of the 2plnd ability grid")
    _add_out(p)
    p.set_defaults(run=cmd_icc, inputs=("params",))

    ev = sub.add_parser("evaluate", help="experiment reports").add_subparsers(dest="subcommand", required=True)

    p = ev.add_parser("compare", help="beta3 vs 2plnd holdout log-loss with Wilcoxon tests")
    p.add_argument("responses", type=Path, nargs="+")
    p.add_argument("--repetitions", type=int, default=HoldoutPlan.repetitions)
    p.add_argument("--alpha", type=float, default=0.05)
    _add_common(p)
    _add_mle(p)
    _add_out(p)
    p.set_defaults(run=cmd_compare, inputs=("responses",))

    p = ev.add_parser("metrics", help="classifier metrics against fitted abilities")
    p.add_argument("panel", type=Path)
    p.add_argument("--posteriors", type=Path, default=None)
    p.add_argument("--train-panel", type=Path, default=None, help="clean training responses added to the fit")
    _add_common(p)
    _add_vi(p)
    _add_out(p)
    p.set_defaults(run=cmd_metrics, inputs=("panel", "posteriors", "train_panel"))

    p = ev.add_parser("noise-scan", help="abilities as test-label noise grows")
    p.add_argument("panel", type=Path)
    p.add_argument("--fractions", default="0,0.1,0.2,0.3,0.4")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--train-panel", type=Path, default=None, help="clean training responses added to every fit")
    _add_common(p)
    _add_vi(p)
    _add_out(p)
    p.set_defaults(run=cmd_noise_scan, inputs=("panel", "train_panel"))

    p = ev.add_parser("flag-noise", help="items with negative posterior discrimination")
    p.add_argument("posteriors", type=Path)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--truth", type=Path, default=None, help="ground_truth.json with a 'flipped' list")
    _add_out(p)
    p.set_defaults(run=cmd_flag_noise, inputs=("posteriors", "truth"))

    p = sub.add_parser("replay", help="rerun a manifest and verify identical outputs")
    p.add_argument("manifest", type=Path)
    _add_out(p)
    p.set_defaults(run=None, inputs=())
    return parser


def _strip_out(argv):
    res, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        res.append(tok)
    return res


def _input_paths(args):
    paths = []
    for name in args.inputs:
        v = getattr(args, name)
        if v is None:
            continue
        paths.extend(v if isinstance(v, list) else [v])
    return paths


def _normalized_argv(argv, args):
    raw = {str(p) for p in _input_paths(args)}
    return [str(Path(tok).resolve()) if tok in raw else tok for tok in _strip_out(argv)]


def _output_hashes(out: Path):
    return {p.name: io.sha256_file(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != MANIFEST}


def _run(argv, args):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    inputs = [Path(p) for p in _input_paths(args)]
    for p in inputs:
        if not p.is_file():
            raise FormatError("cannot open file", p)
    config, seed = args.run(args, out)
    manifest = {
        "format_version": io.FORMAT_VERSION,
        "tool_version": __version__,
        "command": " ".join(x for x in (args.command, getattr(args, "subcommand", None)) if x),
        "argv": _normalized_argv(argv, args),
        "config": config,
        "seed": seed,
        "input_hashes": {str(p.resolve()): io.sha256_file(p) for p in inputs},
        "output_hashes": _output_hashes(out),
    }
    io.write_json(manifest, out / MANIFEST)
    return manifest


def _replay(args):
    m = io.read_json(args.manifest)
    if not isinstance(m, dict) or "argv" not in m or "input_hashes" not in m:
        raise FormatError("not a run manifest", args.manifest)
    for path, digest in m["input_hashes"].items():
        if not Path(path).is_file():
            raise FormatError("input recorded in manifest is missing", path)
        if io.sha256_file(path) != digest:
            raise FormatError("input changed since the manifest was written", path)
    argv = list(m["argv"]) + ["--out", str(args.out)]
    new_args = build_parser().parse_args(argv)
    new = _run(argv, new_args)
    diff = sorted(k for k in set(m["output_hashes"]) | set(new["output_hashes"])
                  if m["output_hashes"].get(k) != new["output_hashes"].get(k))
    if diff:
        print("replay mismatch: " + ", ".join(diff), file=sys.stderr)
        return EXIT_NUMERIC
    print(f"replay ok: {len(new['output_hashes'])} outputs identical")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        with np.errstate(over="ignore", under="ignore"):
            if args.command == "replay":
                return _replay(args)
            _run(argv, args)
    except UnsupportedCombination as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, FloatingPointError, OverflowError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (Beta3Error, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
