"""
Batch commands: each resolves a RunConfig, computes, and writes an artifact directory
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..config import settings
from ..exceptions import ConfigError, FraglabError
from ..models.ensemble import EvolutionPlan
from ..models.lattice import BitConfig, BlockadedBasis, SparseOperator
from ..models.schemas import (
    CommandSummary, EnsembleSeeding, EvolutionMethod, ModelKind, PostselectionSpec, RunConfig, RunManifest, ScalingKind,
    SliomPattern
)
from ..services.basis import dump_basis, enumerate_blockaded, enumerate_full, fibonacci, index_of, parse_config
from ..services.dynamics import (
    collect_temporal_ensemble, disorder_projections, empirical_projections, ensemble_distribution, evolve,
    fidelity_trace, in_fragment_spread, microstate_projections, nc_trace, postselect, sample_snapshots,
    site_populations, z_autocorrelator
)
from ..services.fragments import (
    count_krylov, find_fragments, fragment_dim, fragment_of, frozen_fraction, growth_rate, largest_sector,
    sector_census, sector_patterns, total_dim
)
from ..services.hamiltonians import build_h_eff2, build_h_lgt, build_h_pxq, build_h_ryd
from ..services.lgtmap import decomposition_record, electric_strings, gauss_check, site_charges
from ..services.sliomstats import (
    analytic_distributions, brute_force_distributions, peak_ratio, scaling_collapse, scaling_exponent,
    total_variation
)
from ..utils.helpers import fraction_text, safe_json_dumps, summarize_counts
from . import recipes
from .artifacts import ArtifactWriter

logger = logging.getLogger(__name__)

Runner = Callable[[RunConfig, ArtifactWriter], CommandSummary]

# Models whose ensemble members can be evolved inside their own fragment
FRAGMENT_PRESERVING = (ModelKind.LGT, ModelKind.EFF2)


# =============================================================================
# CONFIG RESOLUTION
# =============================================================================

def _deep_merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = _deep_merge({}, value)
        else:
            merged[key] = value
    return merged


def resolve_config(command: str, config_path: Optional[str] = None, recipe: Optional[str] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Layer recipe, JSON document and flag overrides into a validated RunConfig

    Args:
        command: Command the config is resolved for
        config_path: Optional JSON run document
        recipe: Optional recipe name, must belong to the command
        overrides: Flag values; None entries are ignored

    Returns:
        RunConfig with the seed filled in
    """
    data: Dict[str, Any] = {}
    if recipe:
        if recipes.recipe_command(recipe) != command:
            raise ConfigError(f"recipe '{recipe}' belongs to '{recipes.recipe_command(recipe)}', not '{command}'")
        data = recipes.recipe_overrides(recipe)
    if config_path:
        try:
            document = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read run document {config_path}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError("run document must be a JSON object")
        data = _deep_merge(data, document)
    data = _deep_merge(data, overrides or {})
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid run config: {e}") from e
    if config.seed is None:
        config = config.model_copy(update={"seed": settings.default_seed})
    return config


def _initial_configs(config: RunConfig) -> List[BitConfig]:
    if not config.initial_states:
        raise ConfigError("at least one initial state is required")
    return [parse_config(text, config.chain.n_atoms) for text in config.initial_states]


def _hamiltonian(config: RunConfig, basis: BlockadedBasis) -> SparseOperator:
    params = config.params
    if config.model == ModelKind.LGT:
        return build_h_lgt(basis, params.omega / 2)
    if config.model == ModelKind.RYD:
        return build_h_ryd(basis, params, config.max_range, full_space=config.full_space)
    if config.model == ModelKind.PXQ:
        return build_h_pxq(basis, params.omega)
    if config.model == ModelKind.EFF2:
        h_lgt = build_h_lgt(basis, params.omega / 2)
        correction = build_h_eff2(basis, params.omega, params.v[1])
        return SparseOperator((h_lgt.matrix + correction.matrix).tocsr(), basis, "H_LGT+H_eff2")
    raise ConfigError(f"model '{config.model.value}' has no single Hamiltonian")


def _time_columns(times_us: np.ndarray, omega: float) -> Dict[str, np.ndarray]:
    return {"t_us": times_us, "omega_t": times_us * omega}


def _pattern_text(pattern: Sequence[int]) -> str:
    return "".join("c" if q == 1 else "n" for q in pattern)


# =============================================================================
# COMMAND BODIES
# =============================================================================

def cmd_basis(config: RunConfig, writer: ArtifactWriter) -> CommandSummary:
    spec = config.chain
    basis = enumerate_full(spec) if config.full_space else enumerate_blockaded(spec)
    expected = 2 ** spec.n_atoms if config.full_space else fibonacci(spec.n_atoms + 2)
    summary = {
        "n_atoms": spec.n_atoms,
        "n_padded": spec.n_padded,
        "blockaded": basis.blockaded,
        "count": len(basis),
        "expected": expected,
        "count_check": len(basis) == expected,
    }
    writer.json("basis_summary.json", summary)
    if config.dump_basis:
        lines, header = dump_basis(basis, writer.directory)
        writer.path(lines.name)
        writer.path(header.name)
    return CommandSummary(success=summary["count_check"], message=f"{len(basis)} states", data=summary)


def cmd_map(config: RunConfig, writer: ArtifactWriter) -> CommandSummary:
    records = []
    for config_bits in _initial_configs(config):
        record = decomposition_record(config_bits)
        record["charges"] = site_charges(electric_strings(config_bits))
        record["gauss_law"] = gauss_check(config_bits)
        records.append(record)
    writer.json("map.json", records)
    return CommandSummary(success=all(r["gauss_law"] for r in records), message=f"{len(records)} configuration(s) mapped",
                          data={"labels": [r["label"] for r in records]})


def _sector_table(n_atoms: int, sector: int, live: Optional[Dict[Tuple[int, ...], Tuple[int, str]]]) -> pd.DataFrame:
    patterns = sorted(sector_patterns(n_atoms, sector),
                      key=lambda p: (-p.count(1), tuple(0 if q == 1 else 1 for q in p)))
    golden = n_atoms == 16 and sector == 5
    rows = []
    for position, pattern in enumerate(patterns, start=1):
        n_q, n_0 = pattern.count(1), pattern.count(-1)
        row = {
            "label": recipes.five_cluster_label(pattern) if golden else f"F{position}",
            "pattern": _pattern_text(pattern),
            "sliom": SliomPattern(q=pattern).braces(),
            "nq_n0": f"{{{n_q},{n_0}}}",
            "size": fragment_dim(n_atoms, n_q, n_0),
        }
        if live is not None:
            row["live_size"], row["representative"] = live.get(pattern, (0, ""))
        if golden:
            row["initial_state"] = next(r.initial_state for r in recipes.FIVE_CLUSTER_TABLE if r.pattern == pattern) or ""
        rows.append(row)
    return pd.DataFrame(rows)


def cmd_fragments(config: RunConfig, writer: ArtifactWriter) -> CommandSummary:
    n = config.chain.n_atoms
    census = sector_census(n)
    writer.json("census.json", census.model_dump(mode="json"))
    fraction = frozen_fraction(n)
    data: Dict[str, Any] = {
        "n_atoms": n,
        "n_krylov": census.n_krylov,
        "d_total": census.d_total,
        "frozen_fraction": float(fraction),
        "frozen_fraction_exact": fraction_text(fraction),
        "largest_sector": census.largest_sector.n_c,
    }

    live = None
    table = None
    if fibonacci(n + 2) <= settings.max_basis_states:
        basis = enumerate_blockaded(config.chain)
        table = find_fragments(basis, build_h_lgt(basis, config.params.omega / 2))
        live = {table.patterns[fid].nonzero: (int(members.shape[0]), basis.config(fid).physical)
                for fid, members in table.members.items()}
        rows = []
        for fid, members in sorted(table.members.items()):
            pattern = table.patterns[fid]
            rows.append({
                "fragment_id": fid,
                "n_c": pattern.n_c,
                "n_q": pattern.n_q,
                "n_0": pattern.n_0,
                "pattern": _pattern_text(pattern.nonzero),
                "size": int(members.shape[0]),
                "formula_size": fragment_dim(n, pattern.n_q, pattern.n_0),
            })
        frame = pd.DataFrame(rows)
        writer.csv("fragments.csv", frame)
        data["live_fragments"] = len(table)
        data["live_matches_census"] = bool(len(table) == census.n_krylov and (frame["size"] == frame["formula_size"]).all())
        if config.dump_members:
            writer.json("members.json", {str(fid): [basis.config(int(o)).physical for o in members]
                                         for fid, members in sorted(table.members.items())})
    else:
        logger.info(f"Skipping live fragment search for N_a={n}: F_{n + 2} exceeds the basis limit")

    if config.sector is not None:
        sector_frame = _sector_table(n, config.sector, live)
        writer.csv("sector_table.csv", sector_frame)
        data["sector_fragments"] = len(sector_frame)
        data["sector_dimension"] = int(sector_frame["size"].sum())
        if live is not None:
            data["sector_sizes_match"] = bool((sector_frame["size"] == sector_frame["live_size"]).all())

    if config.sweep:
        rows = []
        for m in config.sweep:
            ratio = frozen_fraction(m)
            top = largest_sector(m)
            rows.append({
                "n_atoms": m,
                "n_krylov": count_krylov(m),
                "d_total": total_dim(m),
                "frozen_fraction": float(ratio),
                "frozen_fraction_exact": fraction_text(ratio),
                "largest_sector": top.n_c,
                "largest_sector_dim": top.dimension,
                "largest_sector_estimate": top.estimate,
            })
        writer.csv("sweep.csv", pd.DataFrame(rows))
        if len(config.sweep) >= 2:
            data["growth_rate"] = growth_rate(config.sweep)

    writer.json("fragments_summary.json", data)
    return CommandSummary(success=data.get("live_matches_census", True), message=f"{census.n_krylov} fragments",
                          data=data)


def _quench_disordered(config: RunConfig, writer: ArtifactWriter, basis: BlockadedBasis) -> Dict[str, Any]:
    params = config.params
    seeds = [int(s) for s in np.random.SeedSequence(config.seed).generate_state(config.disorder.realizations)]
    spreads = {}
    for i, initial in enumerate(_initial_configs(config)):
        per_seed, mean = disorder_projections(basis, params, initial, config.window, config.disorder.sigma_r, seeds,
                                              config.max_range, config.trapezoid, config.method)
        members = fragment_of(basis, initial)
        in_fragment = np.zeros(len(basis), dtype=bool)
        in_fragment[members] = True
        columns = {"ordinal": np.arange(len(basis)), "config": basis.strings(), "in_fragment": in_fragment,
                   "disordered_mean": mean, "disordered_std": per_seed.std(axis=0)}
        spreads[f"disordered_{i}"] = in_fragment_spread(mean, members)
        if config.compare_clean:
            h = build_h_ryd(basis, params, config.max_range)
            plan = EvolutionPlan(h, index_of(basis, initial), np.asarray(config.window.times_us(params.omega)),
                                 config.method, omega=params.omega)
            clean = microstate_projections(plan, config.window, config.trapezoid)
            columns["clean"] = clean
            spreads[f"clean_{i}"] = in_fragment_spread(clean, members)
        writer.csv(f"disorder_projections_{i}.csv", pd.DataFrame(columns))
    spread = params.v1_spread(config.disorder.sigma_r)
    logger.info(f"Position disorder sigma_r={config.disorder.sigma_r} spreads V1 by about {spread:.3g}")
    return {"seeds": seeds, "in_fragment_spread": spreads, "v1_spread": spread}


def cmd_quench(config: RunConfig, writer: ArtifactWriter) -> CommandSummary:
    params = config.params
    omega = params.omega
    full = config.full_space or config.model == ModelKind.PXQ
    basis = enumerate_full(config.chain) if full else enumerate_blockaded(config.chain)
    if config.model == ModelKind.DISORDERED:
        if full:
            raise ConfigError("the disordered model runs on the blockaded basis")
        data = _quench_disordered(config, writer, basis)
        return CommandSummary(success=True, message="disorder comparison written", data=data)

    h = _hamiltonian(config, basis)
    times = np.linspace(0.0, config.t_max_us, config.n_steps)
    spam = config.spam if config.spam_enabled else None
    data: Dict[str, Any] = {"model": config.model.value, "dim": h.dim, "nnz": h.nnz}
    for i, initial in enumerate(_initial_configs(config)):
        plan = EvolutionPlan(h, index_of(basis, initial), times, config.method, omega=omega)
        states = evolve(plan)
        time_cols = _time_columns(times, omega)
        auto = z_autocorrelator(plan, initial, states)
        pops = site_populations(plan, states)
        sites = [f"site_{j}" for j in range(1, basis.spec.n_atoms + 1)]
        writer.csv(f"autocorrelator_{i}.csv", pd.DataFrame({**time_cols, **dict(zip(sites, auto))}))
        writer.csv(f"populations_{i}.csv", pd.DataFrame({**time_cols, **dict(zip(sites, pops))}))
        writer.csv(f"nc_trace_{i}.csv", pd.DataFrame({**time_cols, "n_c": nc_trace(plan, states)}))

        p_bar = microstate_projections(plan, config.window, config.trapezoid)
        columns = {"ordinal": np.arange(len(basis)), "config": basis.strings(), "p_bar": p_bar}
        if basis.blockaded:
            members = fragment_of(basis, initial)
            in_fragment = np.zeros(len(basis), dtype=bool)
            in_fragment[members] = True
            columns["in_fragment"] = in_fragment
            data[f"leakage_{i}"] = float(p_bar[~in_fragment].sum())
        if config.write_snapshots:
            batch = sample_snapshots(plan, config.window, config.shots, spam, config.seed, stream=i)
            batch.write_ndjson(writer.path(f"snapshots_{i}.ndjson"))
            kept, report = postselect(batch, config.postselect.blockade, config.postselect.n_c)
            columns["p_bar_sampled"] = empirical_projections(kept, basis)
            data[f"postselection_{i}"] = report.model_dump()
        writer.csv(f"projections_{i}.csv", pd.DataFrame(columns))

        if config.model == ModelKind.RYD and basis.blockaded:
            reference = EvolutionPlan(build_h_lgt(basis, omega / 2), plan.initial, times, config.method, omega=omega)
            writer.csv(f"fidelity_{i}.csv", pd.DataFrame({**time_cols, "fidelity": fidelity_trace(plan, reference)}))
    return CommandSummary(success=True, message=f"quench of {len(config.initial_states)} state(s)", data=data)


def cmd_ensemble(config: RunConfig, writer: ArtifactWriter) -> CommandSummary:
    n = config.chain.n_atoms
    omega = config.params.omega
    sector = config.sector
    if config.model not in (ModelKind.LGT, ModelKind.RYD, ModelKind.EFF2):
        raise ConfigError(f"ensemble protocol does not support model '{config.model.value}'")
    states = config.initial_states
    if not states:
        if n != 16 or sector not in (None, 5):
            raise ConfigError("initial states are required outside the 16-atom five-cluster sector")
        states = recipes.five_cluster_initial_states()
    configs = [parse_config(text, n) for text in states]

    basis = enumerate_blockaded(config.chain)
    h = _hamiltonian(config, basis)
    spam = config.spam if config.spam_enabled else None
    ensemble, reports = collect_temporal_ensemble(
        h, configs, config.window, config.shots, config.seed, omega, spam=spam,
        postselection=config.postselect, restrict_to_fragment=config.model in FRAGMENT_PRESERVING,
        n_c=sector, method=config.method, seeding=config.seeding,
    )
    dists = ensemble_distribution(ensemble, require_complete=config.require_complete)
    theory = analytic_distributions(n, sector) if sector is not None else {}
    exact = brute_force_distributions(n, sector) if config.include_exact else {}

    rows, tv = [], {}
    for k, dist in dists.items():
        support = sorted(set(dist.weights) | set(theory[k].weights if k in theory else {}))
        for x in support:
            row = {"k": k, "doubled_center": x, "position": x / 2.0, "weight": float(dist.weights.get(x, 0))}
            if k in theory:
                row["theory"] = float(theory[k].weights.get(x, 0))
            if k in exact:
                row["exact"] = float(exact[k].weights.get(x, 0))
            rows.append(row)
        if k in theory:
            tv[k] = total_variation(dist, theory[k])
    writer.csv("distributions.csv", pd.DataFrame(rows))
    if tv:
        writer.csv("total_variation.csv", pd.DataFrame({"k": list(tv), "tv": list(tv.values())}))
    writer.json("postselection.json", {
        _pattern_text(p): {**r.model_dump(), "acceptance": r.acceptance} for p, r in sorted(reports.items())
    })
    if config.write_snapshots:
        for pattern, member in sorted(ensemble.members.items()):
            member.batch.write_ndjson(writer.path(f"snapshots_{_pattern_text(pattern)}.ndjson"))
    logger.info(f"Ensemble kept: {summarize_counts({_pattern_text(p): r.kept for p, r in reports.items()})}")
    data = {"fragments": len(ensemble.members), "sector": sector, "seeding": config.seeding.value,
            "max_tv": max(tv.values()) if tv else None}
    return CommandSummary(success=True, message=f"ensemble over {len(ensemble.members)} fragment(s)", data=data)


def cmd_scaling(config: RunConfig, writer: ArtifactWriter) -> CommandSummary:
    if not (config.scaling or config.collapse or config.peak_ratio_n):
        raise ConfigError("scaling needs --which, --collapse or --peak-ratio")
    data: Dict[str, Any] = {}
    width_rows = []
    for which in config.scaling:
        result = scaling_exponent(config.sweep, which)
        data[which.value] = {"alpha": result.alpha, "stderr": result.stderr, "intercept": result.intercept}
        width_rows.extend({"which": which.value, **p.model_dump()} for p in result.points)
    if width_rows:
        writer.csv("widths.csv", pd.DataFrame(width_rows))
    if config.collapse:
        collapse = scaling_collapse(config.sweep)
        rows = [
            {"n_atoms": c.n_atoms, "n_c": c.n_c, "sublattice": c.sublattice.value, "position": x, "height": y}
            for c in collapse.curves for x, y in zip(c.positions, c.heights)
        ]
        writer.csv("collapse.csv", pd.DataFrame(rows))
        data["collapse_metric"] = collapse.metric
    if config.peak_ratio_n:
        data["peak_ratio"] = peak_ratio(config.peak_ratio_n).model_dump()
    writer.json("scaling.json", data)
    return CommandSummary(success=True, message="scaling analysis written", data=data)


# =============================================================================
# CLICK SURFACE
# =============================================================================

def _execute(command: str, runner: Runner, config_path: Optional[str], recipe: Optional[str],
             seed: Optional[int], out_dir: Optional[str], overrides: Dict[str, Any]) -> None:
    try:
        config = resolve_config(command, config_path, recipe, {**overrides, "seed": seed, "output_dir": out_dir})
        directory = Path(config.output_dir) if config.output_dir else Path(settings.output_dir) / (recipe or command)
        writer = ArtifactWriter(directory, command, config, recipe)
        summary = runner(config, writer)
        writer.finish()
    except ValidationError as e:
        logger.error(f"{command} failed: invalid value: {e}")
        sys.exit(ConfigError.exit_code)
    except FraglabError as e:
        logger.error(f"{command} failed: {e}")
        sys.exit(e.exit_code)
    click.echo(safe_json_dumps(summary.model_dump(mode="json")))


def _parse_sizes(text: Optional[str]) -> Optional[List[int]]:
    """'50:200:10' (inclusive range) or '16,18,20'"""
    if text is None:
        return None
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if len(parts) > 3 or step < 1:
                raise ValueError(text)
            return list(range(start, stop + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise click.BadParameter(f"cannot parse sizes '{text}'") from e


def _parse_postselect(text: Optional[str]) -> Optional[Dict[str, Any]]:
    if text is None:
        return None
    try:
        return PostselectionSpec.parse(text).model_dump()
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


def _switch(ctx, param, value: Optional[str]) -> Optional[bool]:
    return None if value is None else value == "on"


def _states(values: Tuple[str, ...]) -> Optional[List[str]]:
    return list(values) if values else None


def run_options(func):
    """Options shared by every computing command"""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="JSON run document"),
        click.option("--recipe", default=None, help="Named recipe, see `fraglab recipes`"),
        click.option("--seed", type=int, default=None, help="Master seed"),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Artifact directory"),
        click.option("--n-atoms", type=int, default=None, help="Physical chain length"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


SWITCH = click.Choice(["on", "off"])
SEEDING_CHOICE = click.Choice([s.value for s in EnsembleSeeding])
MODEL_CHOICE = click.Choice([m.value for m in ModelKind])
METHOD_CHOICE = click.Choice([m.value for m in EvolutionMethod])


@click.command("basis")
@run_options
@click.option("--full-space/--blockaded", default=None, help="Enumerate all 2^N_a configurations")
@click.option("--dump/--no-dump", default=None, help="Write basis.txt with a checksummed header")
def basis_command(config_path, recipe, seed, out_dir, n_atoms, full_space, dump):
    """Enumerate the basis and check its size."""
    _execute("basis", cmd_basis, config_path, recipe, seed, out_dir,
             {"chain": {"n_atoms": n_atoms}, "full_space": full_space, "dump_basis": dump})


@click.command("map")
@run_options
@click.option("--init", "initial_states", multiple=True, help="g/r configuration, repeatable")
def map_command(config_path, recipe, seed, out_dir, n_atoms, initial_states):
    """Map configurations to clusters, strings and SLIOM patterns."""
    _execute("map", cmd_map, config_path, recipe, seed, out_dir,
             {"chain": {"n_atoms": n_atoms}, "initial_states": _states(initial_states)})


@click.command("fragments")
@run_options
@click.option("--sector", type=int, default=None, help="Cluster number of the sector table")
@click.option("--sweep", default=None, help="Census sizes, e.g. 10:40")
@click.option("--dump-members/--no-dump-members", default=None)
def fragments_command(config_path, recipe, seed, out_dir, n_atoms, sector, sweep, dump_members):
    """Fragment census, live search and sector table."""
    _execute("fragments", cmd_fragments, config_path, recipe, seed, out_dir,
             {"chain": {"n_atoms": n_atoms}, "sector": sector, "sweep": _parse_sizes(sweep),
              "dump_members": dump_members})


@click.command("quench")
@run_options
@click.option("--model", type=MODEL_CHOICE, default=None)
@click.option("--init", "initial_states", multiple=True, help="g/r configuration, repeatable")
@click.option("--tmax", "--t-max", "t_max_us", type=float, default=None, help="Final time in microseconds")
@click.option("--steps", "n_steps", type=int, default=None)
@click.option("--method", type=METHOD_CHOICE, default=None)
@click.option("--max-range", type=int, default=None, help="Interaction range in lattice spacings")
@click.option("--shots", type=int, default=None, help="Snapshots per window time")
@click.option("--snapshots/--no-snapshots", "write_snapshots", default=None)
@click.option("--spam", "spam_enabled", type=SWITCH, callback=_switch, default=None, help="Readout errors: on|off")
@click.option("--postselect", default=None, help="'blockade', 'blockade,nc=5', 'nc=5' or 'none'")
@click.option("--sigma", type=float, default=None, help="Position disorder in micrometres")
@click.option("--realizations", type=int, default=None)
def quench_command(config_path, recipe, seed, out_dir, n_atoms, model, initial_states, t_max_us, n_steps,
                   method, max_range, shots, write_snapshots, spam_enabled, postselect, sigma, realizations):
    """Quench dynamics: autocorrelators, populations and projections."""
    _execute("quench", cmd_quench, config_path, recipe, seed, out_dir, {
        "chain": {"n_atoms": n_atoms}, "model": model, "initial_states": _states(initial_states),
        "t_max_us": t_max_us, "n_steps": n_steps, "method": method, "max_range": max_range, "shots": shots,
        "write_snapshots": write_snapshots, "spam_enabled": spam_enabled,
        "postselect": _parse_postselect(postselect),
        "disorder": {"sigma_r": sigma, "realizations": realizations},
    })


@click.command("ensemble")
@run_options
@click.option("--model", type=MODEL_CHOICE, default=None)
@click.option("--init", "initial_states", multiple=True, help="One representative per fragment, repeatable")
@click.option("--sector", type=int, default=None)
@click.option("--shots", type=int, default=None, help="Snapshots per window time and fragment")
@click.option("--spam", "spam_enabled", type=SWITCH, callback=_switch, default=None, help="Readout errors: on|off")
@click.option("--postselect", default=None, help="'blockade', 'blockade,nc=5', 'nc=5' or 'none'")
@click.option("--seeding", type=SEEDING_CHOICE, default=None,
              help="representative: one state per fragment; fragment: every member")
@click.option("--require-complete/--allow-incomplete", default=None)
@click.option("--exact/--no-exact", "include_exact", default=None, help="Add the enumeration oracle column")
@click.option("--snapshots/--no-snapshots", "write_snapshots", default=None)
def ensemble_command(config_path, recipe, seed, out_dir, n_atoms, model, initial_states, sector, shots,
                     spam_enabled, postselect, seeding, require_complete, include_exact, write_snapshots):
    """Dimension-weighted temporal ensemble of cluster positions."""
    _execute("ensemble", cmd_ensemble, config_path, recipe, seed, out_dir, {
        "chain": {"n_atoms": n_atoms}, "model": model, "initial_states": _states(initial_states),
        "sector": sector, "shots": shots, "spam_enabled": spam_enabled,
        "postselect": _parse_postselect(postselect), "seeding": seeding, "require_complete": require_complete,
        "include_exact": include_exact, "write_snapshots": write_snapshots,
    })


@click.command("scaling")
@run_options
@click.option("--sizes", default=None, help="Chain lengths, e.g. 50:200:10")
@click.option("--which", "scaling", type=click.Choice([k.value for k in ScalingKind]), multiple=True)
@click.option("--collapse/--no-collapse", default=None)
@click.option("--peak-ratio", "peak_ratio_n", type=int, default=None, help="Chain length of the peak ratio")
def scaling_command(config_path, recipe, seed, out_dir, n_atoms, sizes, scaling, collapse, peak_ratio_n):
    """Width scaling exponents, collapse and sublattice peak ratio."""
    _execute("scaling", cmd_scaling, config_path, recipe, seed, out_dir, {
        "chain": {"n_atoms": n_atoms}, "sweep": _parse_sizes(sizes), "scaling": list(scaling) or None,
        "collapse": collapse, "peak_ratio_n": peak_ratio_n,
    })


@click.command("schema")
def schema_command():
    """Print the JSON schemas of run manifests and run documents."""
    click.echo(safe_json_dumps({
        "manifest": RunManifest.model_json_schema(),
        "run_config": RunConfig.model_json_schema(),
    }))


@click.command("recipes")
def recipes_command():
    """List named recipes and the command each belongs to."""
    for name in recipes.recipe_names():
        click.echo(f"{name}\t{recipes.recipe_command(name)}")


COMMANDS = [basis_command, map_command, fragments_command, quench_command, ensemble_command,
            scaling_command, schema_command, recipes_command]
