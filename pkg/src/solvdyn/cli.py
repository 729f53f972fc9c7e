"""Command-line interface: one binary, one subcommand per pipeline.

Every run echoes its full configuration (defaults injected) into the JSON
output under "config", so outputs re-ingest as configs via --config.
Exit codes: 0 success, 2 validation error (machine-readable error object),
64 usage error, 1 computation error carrying the module error name.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

import numpy as np

from . import SCHEMA, exact, presets, serialize
from .certify import (SampledCocycle, certify_linear_t3, certify_model_sol,
                      cone_certify, cs_torus_obstruction)
from .conjugacy import (CenterSystem, build_section_map, fuller_pc,
                        height_progress, semiconjugacy_to_linear)
from .diagnostics import expansivity_scan, gps_check
from .errors import SolvdynError, ValidationError
from .invariant import graph_transform
from .perturbed import PerturbedMap, lyapunov_exponents, sampled_cocycle_from_map
from .pi1 import (AffineModel, AutomorphismData, build_model, foliation_action,
                  normalize_iterate, validate_automorphism)
from .quotients import (classify_nil_double_cover, classify_t3_quotient,
                        heis_example_map, heis_map_homomorphism_report,
                        heis_mul, heis_commutator, in_lattice, lefschetz,
                        tau_k, HeisenbergElement, HEIS_IDENTITY)
from .solgeo import CoverPoint, SolFrame, load_point_cloud

USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _emit(command, config, result, fmt="json", out=None, csv_rows=None, csv_header=None):
    if fmt == "csv":
        rows = csv_rows if csv_rows is not None else []
        target = open(out, "w", newline="") if out else sys.stdout
        try:
            writer = csv.writer(target)
            if csv_header:
                writer.writerow(csv_header)
            writer.writerows(rows)
        finally:
            if out:
                target.close()
        return
    doc = {"schema": SCHEMA, "command": command, "config": config, "result": result}
    text = json.dumps(doc, indent=2, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(x):
    if isinstance(x, Fraction):
        return serialize.fraction_str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x)}")


def _merge_config(args, defaults, allowed):
    """File config + CLI overrides; unknown file fields are rejected."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        file_cfg = doc.get("config", doc)
        unknown = set(file_cfg) - set(allowed)
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in allowed:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    return cfg


def _matrix_arg(cfg, key, size, preset_ok=True):
    val = cfg.get(key)
    if val is None and preset_ok and cfg.get("preset"):
        return serialize.parse_matrix(presets.matrix_preset(cfg["preset"]), size)
    if val is None:
        raise ValidationError(f"missing required matrix --{key}")
    return serialize.parse_matrix(val, size)


def _build_pmap(cfg) -> PerturbedMap:
    a = serialize.parse_matrix(cfg["A"])
    b = serialize.parse_matrix(cfg["B"]) if cfg.get("B") else exact.identity(2)
    w = serialize.parse_rational_vector(cfg["w"], 2) if cfg.get("w") else (Fraction(0), Fraction(0))
    model = AffineModel(b=b, w=w, e=1)
    return PerturbedMap(a, model, k=int(cfg["k"]), eps=float(cfg["eps"]),
                        seed=int(cfg["seed"]))


_MAP_DEFAULTS = {"A": [[2, 1], [1, 1]], "B": None, "w": None, "k": 1,
                 "eps": 0.05, "seed": 0, "tol": 1e-8, "workers": 1}


def main(argv=None) -> int:
    parser = _Parser(prog="solvdyn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, *flags_groups, help=""):
        p = sub.add_parser(name, help=help)
        p.add_argument("--format", choices=["json", "csv"], default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--config", default=None)
        for group in flags_groups:
            for flag, kw in group.items():
                p.add_argument(flag, **kw)
        return p

    mat2 = {"--A": {"dest": "A", "help": "2x2 integer matrix as JSON"}}
    mat3 = {"--M": {"dest": "M", "help": "3x3 integer matrix as JSON"},
            "--preset": {"dest": "preset", "choices": presets.PRESET_NAMES}}
    autf = {"--B": {"dest": "B"}, "--v": {"dest": "v"},
            "--e": {"dest": "e", "type": int, "choices": [1, -1]}}
    mapf = {"--B": {"dest": "B"}, "--w": {"dest": "w"},
            "--k": {"dest": "k", "type": int}, "--eps": {"dest": "eps", "type": float},
            "--seed": {"dest": "seed", "type": int}, "--tol": {"dest": "tol", "type": float},
            "--workers": {"dest": "workers", "type": int}}

    add("eigen", mat2, help="eigen-frame of a hyperbolic 2x2 matrix")
    add("commutant", mat2, help="primitive commutant generator")
    add("aut-validate", mat2, autf, help="validate automorphism data (B, v, e)")
    add("model-build", mat2, autf, help="affine model from automorphism data")
    add("model-normalize", mat2, autf, help="normalized iterate of the model")
    add("cert-linear", mat3, help="certificate for a 3x3 toral automorphism")
    add("cert-sol", mat2, {"--B": {"dest": "B"}, "--w": {"dest": "w"},
                           "--k": {"dest": "k", "type": int}},
        help="sol-metric certificate of a model with height shift")
    add("cert-cone", mat2, mapf,
        {"--cocycle": {"dest": "cocycle"}, "--opening": {"dest": "opening", "type": float},
         "--N": {"dest": "N", "type": int}, "--mesh": {"dest": "mesh", "type": float}},
        help="cone-field certificate of a sampled cocycle")
    add("obstruction", mat2, {"--gamma2-log": {"dest": "gamma2_log", "type": float}},
        help="entropy obstruction for cs-tori under absolute bounds")
    add("lefschetz", mat3, help="Lefschetz number det(I - M)")
    add("quotient-classify", {"--preset": {"dest": "preset", "choices": presets.PRESET_NAMES},
                              "--fstar": {"dest": "fstar"},
                              "--generators": {"dest": "generators"}},
        help="classify T^3/Gamma under a homology action")
    add("heis", {"--k": {"dest": "k", "type": int}, "--point": {"dest": "point"}},
        help="Heisenberg lattice arithmetic and the explicit example map")
    add("flow-lyapunov", mat2, mapf,
        {"--steps": {"dest": "steps", "type": int}, "--point": {"dest": "point"}},
        help="Lyapunov exponents of a (perturbed) suspension model")
    add("graph-transform", mat2, mapf,
        {"--kind": {"dest": "kind", "choices": ["cs", "cu"]},
         "--label": {"dest": "label", "type": float},
         "--maxiter": {"dest": "maxiter", "type": int},
         "--grid": {"dest": "grid"}},
        help="invariant section over a model leaf")
    add("fuller", {"--curve": {"dest": "curve"}, "--T": {"dest": "T", "type": float},
                   "--A": {"dest": "A"}},
        help="Fuller average of the height along a center curve (CSV input)")
    add("section-map", mat2, mapf, {"--grid": {"dest": "grid"}},
        help="sample the zero section and its return map")
    add("semiconjugacy", mat2, mapf,
        {"--n-terms": {"dest": "n_terms", "type": int}, "--grid": {"dest": "grid"}},
        help="semiconjugacy of the section map to the linear model")
    add("gps-check", mat2, mapf, {"--samples": {"dest": "samples", "type": int}},
        help="global-product-structure diagnostics")
    add("height-progress", mat2, mapf,
        {"--samples": {"dest": "samples", "type": int},
         "--n-max": {"dest": "n_max", "type": int}},
        help="empirical height-progress threshold n0")
    add("expansivity", mat2, mapf,
        {"--epsilon": {"dest": "epsilon", "type": float},
         "--steps": {"dest": "steps", "type": int},
         "--grid": {"dest": "grid"}},
        help="expansivity scan of the section return map")

    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except ValidationError as e:
        _print_error(e)
        return 2
    except SolvdynError as e:
        _print_error(e)
        return 1
    except FileNotFoundError as e:
        _print_error(ValidationError(str(e)))
        return 2


def _print_error(e: SolvdynError):
    doc = {"schema": SCHEMA, "error": e.payload()}
    print(json.dumps(doc, indent=2), file=sys.stderr)


def _dispatch(args) -> int:
    cmd = args.command
    fmt = args.format or "json"

    if cmd == "eigen":
        cfg = _merge_config(args, {"A": [[2, 1], [1, 1]]}, ["A"])
        a = serialize.parse_matrix(cfg["A"], 2)
        cfg["A"] = [list(r) for r in a]
        fr = exact.eigen_frame(a)
        _emit(cmd, cfg, {
            "lambda": fr.lam, "lambda_inv": fr.lam_inv,
            "sign_u": fr.sign_u, "sign_s": fr.sign_s,
            "e_u": list(fr.e_u), "e_s": list(fr.e_s),
        }, fmt, args.out)
        return 0

    if cmd == "commutant":
        cfg = _merge_config(args, {"A": [[2, 1], [1, 1]]}, ["A"])
        a = serialize.parse_matrix(cfg["A"], 2)
        cfg["A"] = [list(r) for r in a]
        a0 = exact.commutant_generator(a)
        sign, k = exact.decompose(a, a0)
        _emit(cmd, cfg, {"A0": [list(r) for r in a0],
                         "decomposition": {"sign": sign, "k": k}}, fmt, args.out)
        return 0

    if cmd in ("aut-validate", "model-build", "model-normalize"):
        cfg = _merge_config(args, {"A": [[2, 1], [1, 1]], "B": None, "v": [0, 0], "e": 1},
                            ["A", "B", "v", "e"])
        a = serialize.parse_matrix(cfg["A"], 2)
        b = serialize.parse_matrix(cfg["B"], 2) if cfg.get("B") else a
        cfg["B"] = [list(r) for r in b]
        data = AutomorphismData(b=b, v=serialize.parse_int_vector(cfg["v"]), e=int(cfg["e"]))
        valid = validate_automorphism(a, data)
        if cmd == "aut-validate":
            _emit(cmd, cfg, {"valid": valid}, fmt, args.out)
            return 0
        if not valid:
            raise ValidationError("automorphism data fails A^e B = B A")
        model = build_model(a, data)
        if cmd == "model-build":
            _emit(cmd, cfg, {
                "w": [serialize.fraction_str(c) for c in model.w],
                "e": model.e,
                "foliation_action": foliation_action(a, model),
            }, fmt, args.out)
            return 0
        n, m, z = normalize_iterate(a, model)
        _emit(cmd, cfg, {"n": n, "m": m, "z": list(z),
                         "w": [serialize.fraction_str(c) for c in model.w]}, fmt, args.out)
        return 0

    if cmd == "cert-linear":
        cfg = _merge_config(args, {"M": None, "preset": None}, ["M", "preset"])
        m = _matrix_arg(cfg, "M", 3)
        cfg["M"] = [list(r) for r in m]
        _emit(cmd, cfg, certify_linear_t3(m).to_json(), fmt, args.out)
        return 0

    if cmd == "cert-sol":
        cfg = _merge_config(args, {"A": [[2, 1], [1, 1]], "B": None, "w": None, "k": 1},
                            ["A", "B", "w", "k"])
        a = serialize.parse_matrix(cfg["A"], 2)
        b = serialize.parse_matrix(cfg["B"], 2) if cfg.get("B") else exact.identity(2)
        w = serialize.parse_rational_vector(cfg["w"], 2) if cfg.get("w") else (Fraction(0), Fraction(0))
        model = AffineModel(b=b, w=w, e=1)
        _emit(cmd, cfg, certify_model_sol(a, model, int(cfg["k"])).to_json(), fmt, args.out)
        return 0

    if cmd == "cert-cone":
        defaults = dict(_MAP_DEFAULTS, cocycle=None, opening=0.5, N=1, mesh=1.0 / 16.0)
        cfg = _merge_config(args, defaults, list(defaults))
        if cfg.get("cocycle"):
            pts, mats, step = serialize.load_cocycle_csv(cfg["cocycle"])
            co = SampledCocycle(points=pts, matrices=mats, step=step, mesh=float(cfg["mesh"]))
        else:
            co = sampled_cocycle_from_map(_build_pmap(cfg), mesh=float(cfg["mesh"]))
        cert = cone_certify(co, float(cfg["opening"]), int(cfg["N"]),
                            )
        _emit(cmd, cfg, cert.to_json(), fmt, args.out)
        return 0

    if cmd == "obstruction":
        cfg = _merge_config(args, {"A": [[2, 1], [1, 1]], "gamma2-log": 0.5},
                            ["A", "gamma2-log"])
        if getattr(args, "gamma2_log", None) is not None:
            cfg["gamma2-log"] = args.gamma2_log
        verdict = cs_torus_obstruction(serialize.parse_matrix(cfg["A"], 2),
                                       float(cfg["gamma2-log"]))
        _emit(cmd, cfg, verdict.to_json(), fmt, args.out)
        return 0

    if cmd == "lefschetz":
        cfg = _merge_config(args, {"M": None, "preset": None}, ["M", "preset"])
        m = _matrix_arg(cfg, "M", 3)
        cfg["M"] = [list(r) for r in m]
        _emit(cmd, cfg, {"lefschetz": lefschetz(m)}, fmt, args.out)
        return 0

    if cmd == "quotient-classify":
        cfg = _merge_config(args, {"preset": None, "fstar": None, "generators": None},
                            ["preset", "fstar", "generators"])
        gens = []
        if cfg.get("preset"):
            gens = [presets.tau_map(cfg["preset"])]
            fstar_default = presets.TAU_PAIRING[cfg["preset"]]
        else:
            fstar_default = "paper-matrix-1"
        if cfg.get("generators"):
            from .quotients import AffineTorusMap
            spec = json.loads(cfg["generators"]) if isinstance(cfg["generators"], str) else cfg["generators"]
            gens = [AffineTorusMap(serialize.parse_matrix(g["L"], 3),
                                   serialize.parse_rational_vector(g["b"], 3))
                    for g in spec]
        fstar_name = cfg.get("fstar") or fstar_default
        if isinstance(fstar_name, str) and fstar_name in presets.TORUS_MATRICES:
            fstar = presets.TORUS_MATRICES[fstar_name]
        else:
            fstar = serialize.parse_matrix(fstar_name, 3)
        cfg["fstar"] = [list(r) for r in fstar]
        _emit(cmd, cfg, classify_t3_quotient(gens, fstar).to_json(), fmt, args.out)
        return 0

    if cmd == "heis":
        cfg = _merge_config(args, {"k": 2, "point": None}, ["k", "point"])
        k = int(cfg["k"])
        x = HeisenbergElement(1, 0, 0)
        y = HeisenbergElement(0, 1, 0)
        comm = heis_commutator(x, y)
        result = {
            "commutator_XY": [serialize.fraction_str(c) for c in comm.as_tuple()],
            "example_at_100": [serialize.fraction_str(c) for c in heis_example_map(x).as_tuple()],
            "example_at_010": [serialize.fraction_str(c) for c in heis_example_map(y).as_tuple()],
            "classification": classify_nil_double_cover(k).to_json(),
        }
        if k % 2 == 0:
            sq = tau_k(tau_k(HEIS_IDENTITY, k), k)
            result["tau_k_square"] = [serialize.fraction_str(c) for c in sq.as_tuple()]
            result["tau_k_square_in_lattice"] = in_lattice(sq, k)
        if cfg.get("point"):
            g = HeisenbergElement(*serialize.parse_rational_vector(cfg["point"], 3))
            result["point_image"] = [serialize.fraction_str(c)
                                     for c in heis_example_map(g).as_tuple()]
            result["point_in_lattice"] = in_lattice(g, k)
        import random
        rng = random.Random(0)
        samples = [(HeisenbergElement(rng.randint(-3, 3), rng.randint(-3, 3), Fraction(rng.randint(-6, 6), 2)),
                    HeisenbergElement(rng.randint(-3, 3), rng.randint(-3, 3), Fraction(rng.randint(-6, 6), 2)))
                   for _ in range(40)]
        result["example_homomorphism_report"] = heis_map_homomorphism_report(
            heis_example_map, samples)
        _emit(cmd, cfg, result, fmt, args.out)
        return 0

    if cmd == "flow-lyapunov":
        defaults = dict(_MAP_DEFAULTS, steps=10000, point=[0.2, 0.5, 0.37])
        cfg = _merge_config(args, defaults, list(defaults))
        pmap = _build_pmap(cfg)
        pt_cfg = cfg["point"]
        if isinstance(pt_cfg, str):
            pt_cfg = json.loads(pt_cfg)
        p0 = CoverPoint((float(pt_cfg[0]), float(pt_cfg[1])), float(pt_cfg[2]))
        res = lyapunov_exponents(pmap, p0, int(cfg["steps"]))
        _emit(cmd, cfg, res.to_json(), fmt, args.out)
        return 0

    if cmd == "graph-transform":
        defaults = dict(_MAP_DEFAULTS, kind="cs", label=0.0, maxiter=200, grid=None)
        cfg = _merge_config(args, defaults, list(defaults))
        grid_spec = json.loads(cfg["grid"]) if isinstance(cfg.get("grid"), str) else cfg.get("grid")
        section = graph_transform(_build_pmap(cfg), cfg["kind"], float(cfg["label"]),
                                  grid_spec=grid_spec, tol=float(cfg["tol"]),
                                  max_iter=int(cfg["maxiter"]))
        if fmt == "csv":
            rows = []
            for i, foot in enumerate(section.foot_grid):
                for j, t in enumerate(section.t_grid):
                    rows.append([foot, t, section.offsets[i, j]])
            _emit(cmd, cfg, None, fmt, args.out, csv_rows=rows,
                  csv_header=["foot", "t", "offset"])
        else:
            _emit(cmd, cfg, section.to_json(), fmt, args.out)
        return 0

    if cmd == "fuller":
        cfg = _merge_config(args, {"curve": None, "T": 2.0, "A": [[2, 1], [1, 1]]},
                            ["curve", "T", "A"])
        if not cfg.get("curve"):
            raise ValidationError("fuller needs --curve pointing to a v1,v2,t CSV")
        frame = SolFrame(serialize.parse_matrix(cfg["A"], 2))
        curve = load_point_cloud(cfg["curve"])
        rep = fuller_pc(frame, curve, float(cfg["T"]))
        result = {
            "T": rep["T"],
            "min_derivative": rep["min_derivative"],
            "strictly_increasing": rep["strictly_increasing"],
            "p_c": list(rep["p_c"]),
            "arclength": list(rep["arclength"]),
        }
        if fmt == "csv":
            rows = list(zip(rep["arclength"], rep["p_c"]))
            _emit(cmd, cfg, None, fmt, args.out, csv_rows=rows,
                  csv_header=["arclength", "p_c"])
        else:
            _emit(cmd, cfg, result, fmt, args.out)
        return 0

    if cmd in ("section-map", "semiconjugacy", "gps-check", "height-progress",
               "expansivity"):
        defaults = dict(_MAP_DEFAULTS, grid=13, samples=500, n_terms=20,
                        n_max=12, epsilon=0.05, steps=60)
        cfg = _merge_config(args, defaults, list(defaults))
        pmap = _build_pmap(cfg)
        if cmd == "height-progress":
            rep = height_progress(pmap, n_samples=int(cfg["samples"]),
                                  n_max=int(cfg["n_max"]), seed=int(cfg["seed"]))
            _emit(cmd, cfg, rep, fmt, args.out)
            return 0
        system = CenterSystem(pmap, tol=float(cfg["tol"]))
        if cmd == "gps-check":
            rep = gps_check(system, n_samples=int(cfg["samples"]), seed=int(cfg["seed"]))
            _emit(cmd, cfg, rep.to_json(), fmt, args.out)
            return 0
        section = build_section_map(system, grid_n=int(cfg["grid"]))
        if cmd == "section-map":
            if fmt == "csv":
                rows = [[v[0], v[1], t] for v, t in zip(section.v_nodes, section.heights)]
                _emit(cmd, cfg, None, fmt, args.out, csv_rows=rows,
                      csv_header=["v1", "v2", "t"])
            else:
                _emit(cmd, cfg, section.to_json(), fmt, args.out)
            return 0
        if cmd == "semiconjugacy":
            res = semiconjugacy_to_linear(section, n_terms=int(cfg["n_terms"]))
            _emit(cmd, cfg, res.to_json(), fmt, args.out)
            return 0
        rep = expansivity_scan(section, float(cfg["epsilon"]), int(cfg["steps"]),
                               seed=int(cfg["seed"]))
        _emit(cmd, cfg, rep.to_json(), fmt, args.out)
        return 0

    raise ValidationError(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
