"""Command-line interface.

Configuration precedence: command-line flags, then the YAML file given by
``--config``, then the defaults of ``RunConfig``. Exit codes: 0 success,
1 oracle disagreement or failed criterion, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from typing import Sequence

import jsonschema
import yaml

from . import sweep as sweep_mod
from .char_lattices import character_lattice, verify_symmetry_identification
from .conical_complex import (
    MAX_GENUS, MAX_PRIME, check_admissible, check_smooth_complex, enumerate_isotropic_orbits,
    induce_decomposition, ord_mult, ord_mult_strata, refine_complex, strata_poset,
)
from .polyhedral import (
    Decomposition, IntegralStructure, RationalCone, faces, hilbert_basis, principal_decomposition,
)
from .symplectic_flags import (
    ParahoricType, admissible_triples, bruhat_count, enumerate_group, enumerate_positions,
    gsp_generators, parabolic_orbits, parahoric_chain,
)

COMMANDS = ("weyl", "chain", "charlattice", "hilbert", "smooth", "refine", "complex",
            "strata", "ordmult", "sweep")


class UsageError(Exception):
    pass


class Mismatch(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    g: int = 1
    p: int = 2
    D: tuple[int, ...] = (1,)
    r: int | None = None
    decomposition: str = "principal"
    hilbert_bound: int = 8
    depth: int = 2
    format: str = "json"
    output: str | None = None
    threads: int = 1
    seed: int = 1472

    def validate(self) -> "RunConfig":
        if self.g < 1:
            raise UsageError("g must be at least 1")
        if self.p < 2 or any(self.p % q == 0 for q in range(2, int(self.p ** 0.5) + 1)):
            raise UsageError(f"p={self.p} is not prime")
        try:
            ParahoricType(self.g, tuple(self.D))
        except ValueError as exc:
            raise UsageError(f"invalid D={list(self.D)} for g={self.g}: {exc}") from None
        if self.r is not None and not 0 <= self.r <= self.g:
            raise UsageError("r must lie in [0, g]")
        if self.hilbert_bound < 1 or self.depth < 1 or self.threads < 1:
            raise UsageError("bounds and thread counts must be positive")
        if self.format not in ("json", "dot"):
            raise UsageError("format must be json or dot")
        return self

    @property
    def t(self) -> ParahoricType:
        return ParahoricType(self.g, tuple(self.D))

    def ranks(self) -> list[int]:
        return [self.r] if self.r is not None else list(range(self.g + 1))


# config file layout: run: {g, p, D, r, decomposition}; bounds: {hilbert, depth};
# output: {format, path}; parallel: {threads, seed}
_FILE_KEYS = {
    ("run", "g"): "g", ("run", "p"): "p", ("run", "D"): "D", ("run", "r"): "r",
    ("run", "decomposition"): "decomposition", ("bounds", "hilbert"): "hilbert_bound",
    ("bounds", "depth"): "depth", ("output", "format"): "format", ("output", "path"): "output",
    ("parallel", "threads"): "threads", ("parallel", "seed"): "seed",
}


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise UsageError("config file must be a mapping")
    out = {}
    for section, body in doc.items():
        if not isinstance(body, dict):
            raise UsageError(f"config section {section!r} must be a mapping")
        for key, value in body.items():
            name = _FILE_KEYS.get((section, key))
            if name is None:
                raise UsageError(f"unknown config key {section}.{key}")
            out[name] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if "D" in values:
        values["D"] = tuple(int(x) for x in values["D"])
    if "threads" not in values:
        values["threads"] = (os.cpu_count() or 1) if args.command == "sweep" else 1
    return replace(RunConfig(), **values).validate()


# -- schemas and emitters


def load_schema(name: str) -> dict:
    return json.loads(resources.files("parahoric").joinpath("schemas", f"{name}.json").read_text())


def emit(cfg: RunConfig, schema: str, doc: dict, dot: str | None = None) -> None:
    jsonschema.validate(doc, load_schema(schema))
    if cfg.format == "dot":
        if dot is None:
            raise UsageError("DOT output is only available for the strata command")
        text = dot
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require_complex_genus(cfg: RunConfig) -> None:
    if cfg.g > MAX_GENUS or cfg.p > MAX_PRIME:
        raise UsageError(f"desk-scale limit: the conical complex needs g <= {MAX_GENUS} and p <= {MAX_PRIME}")


def load_decomposition(cfg: RunConfig) -> Decomposition:
    if cfg.decomposition == "principal":
        return principal_decomposition(cfg.g)
    with open(cfg.decomposition) as fh:
        d = json.load(fh)
    cones = tuple(RationalCone.from_json(c) for c in d["cones"])
    gens = tuple(tuple(tuple(r) for r in A) for A in d.get("generators", []))
    return Decomposition(int(d["ambient"]), cones, gens, d.get("kind", "finite"), d.get("g"))


def _induced(cfg: RunConfig):
    _require_complex_genus(cfg)
    try:
        return induce_decomposition(load_decomposition(cfg), cfg.g, cfg.p, cfg.t)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands


def cmd_weyl(cfg: RunConfig) -> None:
    """Enumerate positions w and cross-check orbit, triple and double-coset counts."""
    rows = []
    mismatch = []
    group = enumerate_group(gsp_generators(cfg.g, cfg.p), cfg.p) if cfg.g <= 2 else None
    for r in cfg.ranks():
        W = enumerate_positions(cfg.g, cfg.p, r, cfg.t)
        counts = {"positions": len(W), "triples": len(admissible_triples(cfg.g, r, cfg.t.D)),
                  "bruhat": bruhat_count(cfg.g, r, cfg.t)}
        if group is not None:
            counts["orbits"] = len(parabolic_orbits(cfg.g, cfg.p, r, cfg.t.D, group))
        ok = len(set(counts.values())) == 1
        if not ok:
            mismatch.append(r)
        rows.append({"r": r, "positions": [w.to_json() for w in W], "counts": counts,
                     "status": "PASS" if ok else "FAIL"})
    emit(cfg, "weyl", {"g": cfg.g, "p": cfg.p, "D": list(cfg.D), "ranks": rows})
    if mismatch:
        raise Mismatch(f"count mismatch at r={mismatch}")


def cmd_chain(cfg: RunConfig) -> None:
    """Print the scale vectors of the parahoric chain."""
    chain = parahoric_chain(cfg.t, cfg.p)
    emit(cfg, "chain", {"g": cfg.g, "p": cfg.p, "D": list(cfg.D),
                        "scales": [list(s) for s in chain.scales]})


def cmd_charlattice(cfg: RunConfig) -> None:
    """Character lattices S^w with rank, freeness, index and symmetry check."""
    rows = []
    bad = []
    for r in cfg.ranks():
        for w in enumerate_positions(cfg.g, cfg.p, r, cfg.t):
            C = character_lattice(w, cfg.p)
            sym = verify_symmetry_identification(w, cfg.p)
            if not (C.is_free and C.rank == r * (r + 1) // 2 and sym):
                bad.append(w.label())
            rows.append({"w": w.to_json(), "label": w.label(), "rank": C.rank, "free": C.is_free,
                         "index": C.index, "symmetry": sym,
                         "structure_basis": [[str(x) for x in row] for row in C.structure_basis()]})
    emit(cfg, "charlattice", {"g": cfg.g, "p": cfg.p, "D": list(cfg.D), "lattices": rows})
    if bad:
        raise Mismatch(f"character lattice checks failed for {bad}")


def _cone_of_genus(g: int) -> RationalCone:
    if g > 2:
        raise UsageError("desk-scale limit: Hilbert bases are computed for g <= 2")
    return principal_decomposition(g).maximal[0]


def cmd_hilbert(cfg: RunConfig) -> None:
    """Hilbert bases of the principal cone faces for Sym2 and every S^w."""
    cone = _cone_of_genus(cfg.g)
    n = cone.ambient
    structures = [("Sym2", None, IntegralStructure.standard(n))]
    for w in enumerate_positions(cfg.g, cfg.p, cfg.g, cfg.t):
        structures.append((w.label(), w, IntegralStructure.from_rows(character_lattice(w, cfg.p).structure_basis())))
    rows = []
    failed = []
    for name, w, S in structures:
        for f in faces(cone).faces:
            if f.dim == 0:
                continue
            fc = f.cone(n)
            hb = hilbert_basis(fc, S)
            ok, why = sweep_mod.check_hilbert(fc, S, cfg.hilbert_bound)
            if not ok:
                failed.append(f"{name} {f.rays}: {why}")
            rows.append({"structure": name, "cone": [list(v) for v in f.rays],
                         "basis": [list(v) for v in hb.elements],
                         "lineality": [list(v) for v in hb.lineality],
                         "verified_to_bound": cfg.hilbert_bound, "status": "PASS" if ok else "FAIL"})
    emit(cfg, "hilbert", {"g": cfg.g, "p": cfg.p, "D": list(cfg.D), "cones": rows})
    if failed:
        raise Mismatch("; ".join(failed))


def _table_doc(cfg, SF, rows) -> dict:
    return {"g": cfg.g, "p": cfg.p, "D": list(cfg.D), "refined": SF.refined,
            "rows": [r.to_json() for r in rows],
            "findings": [r.to_json() for r in rows if r.finding]}


def cmd_smooth(cfg: RunConfig) -> None:
    """Smoothness table of the induced decomposition."""
    SF = _induced(cfg)
    emit(cfg, "smoothness", _table_doc(cfg, SF, check_smooth_complex(SF)))


def cmd_refine(cfg: RunConfig) -> None:
    """Smoothness table after refinement to S^w-smooth cones."""
    SF = refine_complex(_induced(cfg))
    rows = check_smooth_complex(SF)
    emit(cfg, "smoothness", _table_doc(cfg, SF, rows))
    if not all(r.smooth_sw for r in rows):
        raise Mismatch("refinement left a non-smooth cone")


def cmd_complex(cfg: RunConfig) -> None:
    """Orbits, cone classes and bounded admissibility of the induced decomposition."""
    SF = _induced(cfg)
    adm = check_admissible(SF, cfg.depth)
    orbits = []
    for r in cfg.ranks():
        for rep in enumerate_isotropic_orbits(cfg.g, cfg.p, cfg.t, r):
            cell = next((c for c in SF.cells if c.rep and c.rep.w == rep.w), None)
            orbits.append({"r": r, "w": rep.w.to_json(), "label": rep.w.label(),
                           "basis": [list(v) for v in rep.summand.basis],
                           "ord_mult": ord_mult(rep.summand, cfg.t, cfg.p),
                           "cone_classes": len(cell.classes) if cell else 0})
    doc = {"g": cfg.g, "p": cfg.p, "D": list(cfg.D), "orbits": orbits,
           "admissibility": {"ok": adm.ok, "checked": adm.checked, "depth": adm.depth,
                             "violations": list(adm.violations), "marker": adm.marker},
           "restriction_certificates": len(SF.certificates),
           "restriction_ok": all(c.ok for c in SF.certificates)}
    emit(cfg, "complex", doc)
    if not adm.ok or not doc["restriction_ok"]:
        raise Mismatch("admissibility or restriction check failed")


def cmd_strata(cfg: RunConfig) -> None:
    """Strata poset as JSON or DOT."""
    P = strata_poset(_induced(cfg))
    emit(cfg, "strata", P.to_json(), P.to_dot())


def cmd_ordmult(cfg: RunConfig) -> None:
    """Strata flagged ordinary-multiplicative."""
    P = strata_poset(_induced(cfg))
    emit(cfg, "ordmult", {"g": cfg.g, "p": cfg.p, "D": list(cfg.D),
                          "flagged": [n.to_json() for n in ord_mult_strata(P)]})


def cmd_sweep(cfg: RunConfig) -> None:
    """Run the acceptance sweep and emit the report."""
    results, _ = sweep_mod.run_sweep(threads=cfg.threads, seed=cfg.seed)
    doc = sweep_mod.report(results)
    emit(cfg, "sweep_report", doc)
    if doc["status"] != "PASS":
        raise Mismatch("acceptance sweep failed")


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parahoric", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--g", type=int)
    common.add_argument("--p", type=int)
    common.add_argument("--D", type=int, nargs="+", help="level flag dimensions, increasing")
    common.add_argument("--r", type=int)
    common.add_argument("--decomposition", help='"principal" or a JSON decomposition file')
    common.add_argument("--hilbert-bound", dest="hilbert_bound", type=int)
    common.add_argument("--depth", type=int, help="word length bound for admissibility")
    common.add_argument("--format", choices=["json", "dot"])
    common.add_argument("--output", help="write to this path instead of stdout")
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        doc = HANDLERS[name].__doc__
        sub.add_parser(name, parents=[common], help=doc, description=doc)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"parahoric: error: {exc}", file=sys.stderr)
        return 2
    except Mismatch as exc:
        print(f"parahoric: mismatch: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
