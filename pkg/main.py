"""
Retrial Queue Toolkit

Command-line front end for the MMAP[2]/PH[2]/S preemptive-repeat priority
retrial model:
- validate / solve / measures on the level-dependent QBD
- simulate for an independent Monte Carlo estimate
- sweep along one parameter axis
- optimize the channel allocation (direct search, PSO, simulated annealing)
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from src.agents import AnnealingAgent, AnnealingSettings, DirectSearchAgent, SwarmAgent, SwarmSettings
from src.config import settings
from src.config.loader import (
    AXES,
    TABLE_MU_H,
    apply_axis,
    config_hash,
    dump_config,
    resolve_config,
)
from src.models.manifest import RunManifest
from src.models.optimization import LambdaObjective, OptimizationProblem, OptimizationResult
from src.models.results import DISTRIBUTION_MEASURES, SCALAR_MEASURES
from src.models.stochastic import ModelConfig
from src.tools import export_tools
from src.tools.generator_tools import GeneratorBuilder, export_triplets
from src.tools.simulation_tools import simulate, trend_sweep
from src.utils.errors import InfeasibleError, RetrialError, ValidationError
from src.utils.logging_utils import setup_logging
from src.workflows.solve_workflow import SolveWorkflow
from src.workflows.sweep_workflow import SweepWorkflow, parse_grid

DEFAULT_EPS = 1e-4
TABLE_EPS = 1e-3
METHODS = ("ds", "pso", "sa")


class RetrialToolkit:
    """Main application class: one method per subcommand."""

    def __init__(self, workers: int = settings.WORKERS):
        self.workers = workers
        self.solve_workflow = SolveWorkflow()
        self.sweep_workflow = SweepWorkflow(workers=workers)

    def resolve(self, manifest: RunManifest) -> ModelConfig:
        return resolve_config(
            config_path=manifest.config_path,
            preset=manifest.preset,
            overrides=manifest.overrides,
            mode=manifest.mode,
            trunc_eps=manifest.trunc_eps,
            m_cap=manifest.m_cap,
        )

    def _prepare(self, manifest: RunManifest):
        cfg = self.resolve(manifest)
        out = manifest.output_dir()
        digest = config_hash(cfg)
        dump_config(cfg, out / "config.json")
        print(f"📋 {manifest.subcommand}: {manifest.source} (config_sha256={digest[:12]}…)")
        return cfg, out, digest

    @staticmethod
    def _raise_on_error(state) -> None:
        if state.get("status") == "error":
            error = state.get("error")
            if isinstance(error, Exception):
                raise error
            raise RetrialError(state.get("error_message", "workflow failed"))

    def cmd_validate(self, manifest: RunManifest) -> List[str]:
        cfg = self.resolve(manifest)
        out = manifest.output_dir()
        digest = config_hash(cfg)
        violations = [str(v) for v in cfg.validate()]
        export_tools.write_json({"config": cfg.name, "violations": violations},
                                out / "validate.json", digest)
        if violations:
            for violation in violations:
                print(f"   ❌ {violation}")
            raise ValidationError(f"{len(violations)} violation(s) in '{cfg.name}'", violations=violations)
        dump_config(cfg, out / "config.json")
        print(f"✅ Configuration '{cfg.name}' is valid (lambda_H={cfg.lambda_h:.4g}, lambda_N={cfg.lambda_n:.4g})")
        return violations

    def cmd_solve(self, manifest: RunManifest):
        cfg, out, digest = self._prepare(manifest)
        state = self.solve_workflow.run(cfg, with_measures=False)
        self._raise_on_error(state)
        ss = state["steady_state"]
        export_tools.write_csv(export_tools.steady_state_frame(ss), out / "steady_state.csv", digest)
        export_tools.write_json({
            "M": ss.M,
            "mode": ss.mode.value,
            "residual": ss.residual,
            "clamped": ss.clamped,
            "level_mass": ss.level_mass,
            "truncation": state["truncation"].to_dict(),
        }, out / "solve.json", digest)
        if manifest.options.get("export_blocks"):
            self._export_blocks(cfg, ss.M, out, digest)
        print(f"📊 Steady state written to {out / 'steady_state.csv'}")
        return ss

    def _export_blocks(self, cfg: ModelConfig, M: int, out: Path, digest: str) -> None:
        builder = GeneratorBuilder(cfg)
        blocks_dir = out / "blocks"
        blocks_dir.mkdir(exist_ok=True)
        header = export_tools.header_line(digest)
        for level in range(M + 1):
            export_triplets(builder.main(level, M), blocks_dir / f"main_{level}.txt", header)
            if level < M:
                export_triplets(builder.upper(level), blocks_dir / f"up_{level}.txt", header)
                export_triplets(builder.lower(level + 1), blocks_dir / f"down_{level + 1}.txt", header)

    def cmd_measures(self, manifest: RunManifest):
        cfg, out, digest = self._prepare(manifest)
        state = self.solve_workflow.run(cfg)
        self._raise_on_error(state)
        report = state["measures"]
        export_tools.write_csv(export_tools.measures_frame(report), out / "measures.csv", digest)
        print(f"📊 Measures at M={report.M} written to {out / 'measures.csv'}")
        return report

    def cmd_simulate(self, manifest: RunManifest):
        cfg, out, digest = self._prepare(manifest)
        cfg = cfg.validated()
        opts = manifest.options
        horizon = int(opts.get("horizon", 10 ** 6))
        batches = int(opts.get("batches", settings.SIM_BATCHES))
        warmup = float(opts.get("warmup", settings.SIM_WARMUP))
        truncation_level = opts.get("truncation_level")
        if opts.get("axis"):
            grid = parse_grid(opts["grid"])
            print(f"🎲 Simulating {len(grid)} points along {opts['axis']} (common seed {manifest.seed})")
            pairs = trend_sweep(cfg, opts["axis"], grid, horizon, manifest.seed, warmup, batches,
                                self.workers, truncation_level)
            rows = [(f"{opts['axis']}={value:g}", estimate) for value, estimate in pairs]
        else:
            print(f"🎲 Simulating {horizon} events (seed {manifest.seed})")
            estimate = simulate(cfg, horizon, manifest.seed, warmup, batches, truncation_level)
            rows = [("base", estimate)]
        frame = export_tools.simulation_frame(rows)
        export_tools.write_csv(frame, out / "simulation.csv", digest)
        print(f"📊 {len(frame)} estimates written to {out / 'simulation.csv'}")
        return rows

    def cmd_sweep(self, manifest: RunManifest):
        cfg, out, digest = self._prepare(manifest)
        opts = manifest.options
        grid = parse_grid(opts["grid"])
        measures = opts.get("measures") or ["P_d", "P_preempt"]
        state = self.sweep_workflow.run(cfg, opts["axis"], grid, measures,
                                        channels=opts.get("channels"), wide=manifest.wide)
        self._raise_on_error(state)
        table = state["table"]
        export_tools.write_csv(table, out / "sweep.csv", digest)
        print(f"📊 Sweep table ({len(table)} rows) written to {out / 'sweep.csv'}")
        return table

    def _problem(self, cfg: ModelConfig, opts, table: bool) -> OptimizationProblem:
        default_eps = TABLE_EPS if table else DEFAULT_EPS
        return OptimizationProblem(
            base=cfg,
            eps1=opts.get("eps1") or default_eps,
            eps2=opts.get("eps2") or default_eps,
            s_min=opts.get("s_min", 2),
            s_max=opts.get("s_max", 10),
            lambda_min=opts.get("lambda_min", 0.01),
            lambda_max=opts.get("lambda_max", 2.0),
            grid_step=opts.get("grid_step", 0.025),
            penalty=opts.get("penalty", 1e8),
            lambda_objective=LambdaObjective(opts.get("lambda_objective", "max")),
        )

    def _optimize_once(self, problem: OptimizationProblem, method: str, seed: int, opts) -> OptimizationResult:
        if method == "ds":
            return DirectSearchAgent(problem, workers=self.workers).run()
        if method == "pso":
            params = SwarmSettings(
                swarm_size=opts.get("swarm_size", 60),
                maxite=opts.get("maxite", 200),
                patience=opts.get("patience", 100),
            )
            return SwarmAgent(problem, params, seed=seed, workers=self.workers).run()
        params = AnnealingSettings(cooling=opts.get("cooling", 0.95), epoch_length=opts.get("epoch_length", 50))
        return AnnealingAgent(problem, params, seed=seed).run()

    def cmd_optimize(self, manifest: RunManifest):
        cfg, out, digest = self._prepare(manifest)
        opts = manifest.options
        method = opts.get("method", "pso")
        table = opts.get("table")
        results = []
        if table is not None:
            print(f"📋 Table run: lambda_N={table:g}, mu_N=1, mu_H over {list(TABLE_MU_H)}")
            base = apply_axis(apply_axis(cfg, "lambda_n", table), "mu_n", 1.0)
            for mu_h in TABLE_MU_H:
                problem = self._problem(apply_axis(base, "mu_h", mu_h).validated(), opts, table=True)
                result = self._optimize_once(problem, method, manifest.seed, opts)
                results.append(result.row(lambda_n=table, mu_h=mu_h))
        else:
            problem = self._problem(cfg.validated(), opts, table=False)
            result = self._optimize_once(problem, method, manifest.seed, opts)
            results.append(result.row(mu_h=cfg.service_h.mean_rate))
        export_tools.write_csv(export_tools.optimization_frame(results), out / "optimize.csv", digest)
        print(f"📊 Optimisation rows written to {out / 'optimize.csv'}")
        if not any(row["feasible"] for row in results):
            raise InfeasibleError(f"{method} found no feasible point")
        return results


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retrial", description="Retrial queue toolkit")
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="JSON configuration file")
    source.add_argument("--preset", help="named preset (baseline, exponential, table-ln<x>-mh<y>)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--out", default=settings.OUTPUT_DIR, help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mode", choices=["ordered", "lumped"])
    common.add_argument("--trunc-eps", type=float)
    common.add_argument("--m-cap", type=int)
    common.add_argument("--wide", action="store_true", help="one row per point in tabular output")
    common.add_argument("--lambda-objective", choices=["max", "free"], default="max")
    common.add_argument("--log-level", default=None)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check model invariants")
    solve_parser = sub.add_parser("solve", parents=[common], help="steady-state probabilities")
    solve_parser.add_argument("--export-blocks", action="store_true", help="write generator blocks as triplets")
    sub.add_parser("measures", parents=[common], help="performance measures")

    sim = sub.add_parser("simulate", parents=[common], help="discrete-event simulation")
    sim.add_argument("--horizon", type=int, default=10 ** 6, help="number of events")
    sim.add_argument("--batches", type=int, default=settings.SIM_BATCHES)
    sim.add_argument("--warmup", type=float, default=settings.SIM_WARMUP)
    sim.add_argument("--truncation-level", type=int, help="cap the orbit at level M as the truncated chain does and estimate P_b")
    sim.add_argument("--axis", choices=AXES)
    sim.add_argument("--grid")

    sweep = sub.add_parser("sweep", parents=[common], help="solver sweep along one axis")
    sweep.add_argument("--axis", choices=AXES, required=True)
    sweep.add_argument("--grid", required=True, help="start:stop:step or comma-separated values")
    sweep.add_argument("--measure", default="P_d,P_preempt")
    sweep.add_argument("--s", default=None, help="comma-separated channel counts")

    opt = sub.add_parser("optimize", parents=[common], help="channel allocation")
    opt.add_argument("--method", choices=METHODS, default="pso")
    opt.add_argument("--table", type=float, help="lambda_N of a table row family")
    opt.add_argument("--eps1", type=float)
    opt.add_argument("--eps2", type=float)
    opt.add_argument("--s-max", type=int, default=10)
    opt.add_argument("--lambda-max", type=float, default=2.0)
    opt.add_argument("--grid-step", type=float, default=0.025)
    opt.add_argument("--penalty", type=float, default=1e8)
    opt.add_argument("--swarm-size", type=int, default=60)
    opt.add_argument("--maxite", type=int, default=200)
    opt.add_argument("--patience", type=int, default=100)
    opt.add_argument("--cooling", type=float, default=0.95)
    opt.add_argument("--epoch-length", type=int, default=50)
    return parser


def _measure_names(raw: str) -> List[str]:
    names = [name.strip() for name in raw.split(",") if name.strip()]
    known = set(SCALAR_MEASURES)
    for name in names:
        base = name.split("[")[0]
        if base not in known and base not in DISTRIBUTION_MEASURES:
            raise ValidationError(f"unknown measure '{name}'")
    return names


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    options = {"lambda_objective": args.lambda_objective}
    if args.command == "solve":
        options["export_blocks"] = args.export_blocks
    elif args.command == "simulate":
        if (args.axis is None) != (args.grid is None):
            raise ValidationError("--axis and --grid must be given together")
        options.update(horizon=args.horizon, batches=args.batches, warmup=args.warmup,
                       truncation_level=args.truncation_level, axis=args.axis, grid=args.grid)
    elif args.command == "sweep":
        options.update(axis=args.axis, grid=args.grid, measures=_measure_names(args.measure),
                       channels=[int(s) for s in args.s.split(",")] if args.s else None)
    elif args.command == "optimize":
        options.update(method=args.method, table=args.table, eps1=args.eps1, eps2=args.eps2,
                       s_max=args.s_max, lambda_max=args.lambda_max, grid_step=args.grid_step,
                       penalty=args.penalty, swarm_size=args.swarm_size, maxite=args.maxite,
                       patience=args.patience, cooling=args.cooling, epoch_length=args.epoch_length)
    return RunManifest(
        subcommand=args.command,
        config_path=args.config,
        preset=args.preset,
        overrides=list(args.overrides),
        out_dir=args.out,
        seed=args.seed,
        wide=args.wide,
        mode=args.mode,
        trunc_eps=args.trunc_eps,
        m_cap=args.m_cap,
        options=options,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        manifest = manifest_from_args(args)
        app = RetrialToolkit()
        getattr(app, f"cmd_{args.command}")(manifest)
        return 0
    except RetrialError as exc:
        print(f"❌ {type(exc).__name__}: {exc}")
        return exc.exit_code
    except KeyboardInterrupt:
        print("\n👋 Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
