"""Command-line interface.

Exit codes: 0 feasible / success, 1 infeasible (or a failed reproduction
check), 2 error (bad input, solver failure or an inaccurate solve).
"""

import argparse
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis as an
from . import reproduce, sim, synthesis, sysio, systems
from .dwell import DwellSpec, sample_sequence
from .errors import ImpiqcError
from .model import Estimator, EstimationPlant, JumpEstimationPlant, PerfIndex, as_feedback, closed_loop

EXIT_OK, EXIT_INFEASIBLE, EXIT_ERROR = 0, 1, 2
COMMANDS = ("analyze", "gain", "synthesize", "simulate", "reproduce")
DISTURBANCES = ("d1", "d2", "white", "zero")


class ConfigError(ImpiqcError, ValueError):
    code = "bad-config"


@dataclass
class RunConfig:
    command: str
    system: str | None = None
    beta: float | None = None
    spec: DwellSpec | None = None
    test: str | None = None
    mode: str = "stability"
    gamma: float | None = None
    nu: int | None = None
    L: int | None = None
    eps: float | None = None
    output: str | None = None
    seed: int = 0
    route: str = "iqc"
    horizon: int = 200
    disturbance: str = "d1"
    estimator: str | None = None
    target: str | None = None
    plot: bool = True

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in ("analyze", "gain"):
            if self.test not in an.TESTS:
                raise ConfigError(f"--test must be one of {', '.join(an.TESTS)}")
            if self.L is not None and self.test != "path":
                raise ConfigError("--L only applies to the path test")
            if self.nu is not None and not self.test.startswith("iqc-"):
                raise ConfigError("--nu only applies to iqc-clock / iqc-lifting")
            if self.mode == "performance" and self.gamma is None:
                raise ConfigError("performance mode needs --gamma")
        if self.command == "synthesize":
            if self.route not in synthesis.ROUTES:
                raise ConfigError(f"--route must be one of {', '.join(synthesis.ROUTES)}")
            if self.nu is not None and self.route != "iqc":
                raise ConfigError("--nu only applies to the iqc route")
        if self.command != "reproduce" and self.system is None:
            raise ConfigError("--system is required")
        if self.command in ("analyze", "gain", "synthesize", "simulate") and self.spec is None:
            raise ConfigError("a dwell-time spec (--rdt/--edt/--mdt/--adt/--spec) is required")
        if self.nu is not None and self.nu < 0:
            raise ConfigError("--nu must be >= 0")
        if self.L is not None and self.L < 1:
            raise ConfigError("--L must be >= 1")
        return self


def _add_spec(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rdt", nargs=2, type=int, metavar=("TMIN", "TMAX"))
    g.add_argument("--edt", type=int, metavar="T")
    g.add_argument("--mdt", type=int, metavar="TMIN")
    g.add_argument("--adt", action="store_true")
    g.add_argument("--spec", help="e.g. 'RDT(4,5)'")


def _spec_from(ns):
    if getattr(ns, "rdt", None):
        return DwellSpec.rdt(*ns.rdt)
    if getattr(ns, "edt", None) is not None:
        return DwellSpec.edt(ns.edt)
    if getattr(ns, "mdt", None) is not None:
        return DwellSpec.mdt(ns.mdt)
    if getattr(ns, "adt", False):
        return DwellSpec.adt()
    if getattr(ns, "spec", None):
        return DwellSpec.parse(ns.spec)
    return None


def build_parser():
    parser = argparse.ArgumentParser(prog="impiqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--system", help="JSON system file")
        p.add_argument("--beta", type=float, help="parameter of the exa1 family")
        p.add_argument("--eps", type=float)
        p.add_argument("--output", "-o")
        p.add_argument("--seed", type=int, default=0)
        _add_spec(p)

    for name in ("analyze", "gain"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--test", required=True, choices=an.TESTS)
        p.add_argument("--nu", type=int)
        p.add_argument("--L", type=int)
        if name == "analyze":
            p.add_argument("--mode", default="stability", choices=an.MODES)
            p.add_argument("--gamma", type=float, help="gain level for performance mode")

    p = sub.add_parser("synthesize")
    common(p)
    p.add_argument("--route", default="iqc", choices=synthesis.ROUTES)
    p.add_argument("--nu", type=int)
    p.add_argument("--gamma", type=float, help="fixed level instead of minimizing")

    p = sub.add_parser("simulate")
    common(p)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--disturbance", default="d1", choices=DISTURBANCES)
    p.add_argument("--estimator", help="estimator JSON; closes the loop with an estimation plant")

    p = sub.add_parser("reproduce")
    p.add_argument("target", choices=reproduce.TARGETS)
    p.add_argument("--output", "-o", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-plot", dest="plot", action="store_false")
    return parser


def config_from_args(argv):
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command)
    for key in ("system", "beta", "test", "mode", "gamma", "nu", "L", "eps", "output", "seed",
                "route", "horizon", "disturbance", "estimator", "target", "plot"):
        if hasattr(ns, key):
            setattr(cfg, key, getattr(ns, key))
    if cfg.command == "gain":
        cfg.mode = "gain"
    if cfg.command != "reproduce":
        cfg.spec = _spec_from(ns)
    return cfg.validate()


def _load(cfg):
    return sysio.load(cfg.system, beta=cfg.beta)


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(cfg):
    system = _load(cfg)
    P = None
    if cfg.mode == "performance":
        f = as_feedback(system)
        P = PerfIndex.gain(cfg.gamma ** 2, f.n_e, f.n_d)
    cert = an.run_test(cfg.test, system, P=P, spec=cfg.spec, mode=cfg.mode,
                       nu=cfg.nu if cfg.nu is not None else 1,
                       L=cfg.L if cfg.L is not None else 1, eps=cfg.eps)
    row = an.certificate_row(cert, os.path.basename(cfg.system))
    buf = io.StringIO()
    an.write_csv([row], buf)
    _emit(buf.getvalue(), cfg.output)
    summary = {"status": cert.status, "gamma": None if np.isnan(cert.gamma) else cert.gamma,
               "message": cert.message}
    sys.stderr.write(json.dumps(summary) + "\n")
    return {"feasible": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(cert.status, EXIT_ERROR)


def cmd_synthesize(cfg):
    plant = _load(cfg)
    if not isinstance(plant, (EstimationPlant, JumpEstimationPlant)):
        raise ConfigError("synthesize needs an estimation plant")
    if cfg.route == "iqc":
        res = synthesis.synthesize_iqc(plant, cfg.spec, nu=cfg.nu if cfg.nu is not None else 1,
                                       gamma=cfg.gamma, eps=cfg.eps)
    else:
        if not isinstance(plant, JumpEstimationPlant):
            raise ConfigError("the slack route needs a flow/jump estimation plant")
        res = synthesis.synthesize_slack(plant, cfg.spec, gamma=cfg.gamma, eps=cfg.eps)
    summary = {"route": res.route, "status": res.status,
               "gamma": None if np.isnan(res.gamma) else res.gamma,
               "estimator_gamma": None if np.isnan(res.estimator_gamma) else res.estimator_gamma,
               "seconds": res.solve_time, "message": res.message}
    if res.feasible and res.estimator is not None:
        doc = sysio.to_dict(res.estimator, labels={"route": res.route, "spec": str(cfg.spec)})
        _emit(json.dumps(doc, indent=1) + "\n", cfg.output)
    sys.stderr.write(json.dumps(summary) + "\n")
    return {"feasible": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(res.status, EXIT_ERROR)


def _disturbance(cfg, n_d, rng):
    if cfg.disturbance == "d1":
        return systems.d1
    if cfg.disturbance == "d2":
        return systems.d2
    if cfg.disturbance == "zero":
        return None
    return rng.uniform(-1.0, 1.0, size=(cfg.horizon + 1, n_d))


def cmd_simulate(cfg):
    system = _load(cfg)
    if isinstance(system, (EstimationPlant, JumpEstimationPlant)):
        est = sysio.load(cfg.estimator) if cfg.estimator else None
        if est is not None and not isinstance(est, Estimator):
            raise ConfigError("--estimator must be an estimator file")
        if est is None:
            est = Estimator.zero(1, system.n_v, system.n_y)
        system = closed_loop(system, est)
    elif cfg.estimator:
        raise ConfigError("--estimator needs an estimation plant")
    rng = np.random.default_rng(cfg.seed)
    if cfg.spec.bounded:
        seq = sample_sequence(cfg.spec, cfg.horizon, "random", seed=cfg.seed)
    else:
        lo = max(cfg.spec.tmin, 0)
        seq = sample_sequence(cfg.spec, cfg.horizon, "random", seed=cfg.seed, bounds=(lo, lo + 10))
    f = as_feedback(system)
    traj = sim.simulate(f, seq, d=_disturbance(cfg, f.n_d, rng))
    buf = io.StringIO()
    traj.to_csv(buf)
    _emit(buf.getvalue(), cfg.output)
    return EXIT_OK


def cmd_reproduce(cfg):
    summary = reproduce.run(cfg.target, cfg.output, seed=cfg.seed)
    lines = []
    for c in summary["checks"]:
        lines.append(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}  {c['detail']}")
    if cfg.plot:
        from . import plotting

        if plotting.available():
            lines.append(f"figure: {plotting.render(cfg.target, summary, cfg.output)}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if all(c["passed"] for c in summary["checks"]) else EXIT_INFEASIBLE


HANDLERS = {"analyze": cmd_analyze, "gain": cmd_analyze, "synthesize": cmd_synthesize,
            "simulate": cmd_simulate, "reproduce": cmd_reproduce}


def main(argv=None):
    try:
        cfg = config_from_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    except ImpiqcError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    try:
        return HANDLERS[cfg.command](cfg)
    except (ImpiqcError, OSError, ValueError, TypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
