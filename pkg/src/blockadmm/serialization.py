"""JSON round-tripping for instances and certificates.

Floats are written through Python's shortest round-trip repr, so a
save/load cycle reproduces every array bit for bit.  Only the concrete
oracle and domain types shipped with the package are serializable; custom
oracles should persist their own construction parameters instead.
"""

from __future__ import annotations

import json
from typing import Union

import numpy as np

from .blocks import BlockLinearMap, BlockSizes, BlockVector
from .certify import Certificate
from .exceptions import ShapeError
from .problem import (
    Box,
    DenseQuadraticOracle,
    InstanceMetadata,
    ProblemInstance,
    SeparableQuadraticOracle,
)

__all__ = [
    "instance_to_json",
    "instance_from_json",
    "save_instance",
    "load_instance",
    "certificate_to_json",
    "certificate_from_json",
    "save_certificate",
    "load_certificate",
]

INSTANCE_FORMAT = "blockadmm-instance"
CERTIFICATE_FORMAT = "blockadmm-certificate"


def _array(a):
    return np.asarray(a, dtype=float).tolist()


def _maybe_array(a):
    return None if a is None else _array(a)


def instance_to_json(inst: ProblemInstance) -> str:
    if isinstance(inst.smooth, SeparableQuadraticOracle):
        smooth = {
            "kind": "separable-quadratic",
            "quad_diag": _array(inst.smooth.quad_diag),
            "linear": _array(inst.smooth.linear),
        }
    elif isinstance(inst.smooth, DenseQuadraticOracle):
        smooth = {
            "kind": "dense-quadratic",
            "matrix": [_array(row) for row in inst.smooth.matrix],
            "linear": _array(inst.smooth.linear),
        }
    else:
        raise ShapeError(f"cannot serialize oracle of type {type(inst.smooth).__name__}")
    if not all(isinstance(b, Box) for b in inst.nonsmooth):
        raise ShapeError("only box domains are serializable")
    meta = None
    if inst.metadata is not None:
        m = inst.metadata
        meta = {
            "weak_convexity": _maybe_array(m.weak_convexity),
            "cross_lipschitz": _maybe_array(m.cross_lipschitz),
            "feasible_point": _maybe_array(m.feasible_point),
            "psi_lipschitz": m.psi_lipschitz,
            "domain_radius": m.domain_radius,
            "boundary_distance": m.boundary_distance,
            "grad_bound": m.grad_bound,
            "f_min": m.f_min,
            "f_max": m.f_max,
            "min_singular_value": m.min_singular_value,
        }
    doc = {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "name": inst.name,
        "block_sizes": list(inst.sizes.sizes),
        "smooth": smooth,
        "boxes": [b.radius for b in inst.nonsmooth],
        "constraint": {
            "rows": inst.map.rows,
            "blocks": [[_array(row) for row in mat] for mat in inst.map.blocks],
            "rhs": _array(inst.rhs),
        },
        "x0": None if inst.x0 is None else _array(inst.x0.data),
        "metadata": meta,
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def instance_from_json(text: str) -> ProblemInstance:
    doc = json.loads(text)
    if doc.get("format") != INSTANCE_FORMAT:
        raise ShapeError("not an instance document")
    sizes = BlockSizes(doc["block_sizes"])
    smooth_doc = doc["smooth"]
    if smooth_doc["kind"] == "separable-quadratic":
        smooth = SeparableQuadraticOracle(
            sizes, np.array(smooth_doc["quad_diag"]), np.array(smooth_doc["linear"])
        )
    elif smooth_doc["kind"] == "dense-quadratic":
        smooth = DenseQuadraticOracle(
            sizes, np.array(smooth_doc["matrix"]), np.array(smooth_doc["linear"])
        )
    else:
        raise ShapeError(f"unknown smooth kind {smooth_doc['kind']!r}")
    lin_map = BlockLinearMap([np.array(mat) for mat in doc["constraint"]["blocks"]])
    boxes = [Box(sizes.sizes[t], doc["boxes"][t]) for t in range(sizes.count)]
    meta = None
    if doc.get("metadata") is not None:
        m = doc["metadata"]
        meta = InstanceMetadata(
            weak_convexity=None if m["weak_convexity"] is None else np.array(m["weak_convexity"]),
            cross_lipschitz=None if m["cross_lipschitz"] is None else np.array(m["cross_lipschitz"]),
            feasible_point=None if m["feasible_point"] is None else np.array(m["feasible_point"]),
            psi_lipschitz=m["psi_lipschitz"],
            domain_radius=m["domain_radius"],
            boundary_distance=m["boundary_distance"],
            grad_bound=m["grad_bound"],
            f_min=m["f_min"],
            f_max=m["f_max"],
            min_singular_value=m["min_singular_value"],
        )
    x0 = None if doc.get("x0") is None else BlockVector(sizes, np.array(doc["x0"]))
    return ProblemInstance(
        smooth=smooth,
        nonsmooth=boxes,
        map=lin_map,
        rhs=np.array(doc["constraint"]["rhs"]),
        metadata=meta,
        x0=x0,
        name=doc.get("name", ""),
    )


def save_instance(inst: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance_to_json(inst))


def load_instance(path) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(fh.read())


def certificate_to_json(cert: Certificate) -> str:
    doc = {
        "format": CERTIFICATE_FORMAT,
        "version": 1,
        "block_sizes": list(cert.x.sizes.sizes),
        "x": _array(cert.x.data),
        "p": _array(cert.p),
        "v": _array(cert.v.data),
        "eps": float(cert.eps),
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def certificate_from_json(text: str) -> Certificate:
    doc = json.loads(text)
    if doc.get("format") != CERTIFICATE_FORMAT:
        raise ShapeError("not a certificate document")
    sizes = BlockSizes(doc["block_sizes"])
    return Certificate(
        x=BlockVector(sizes, np.array(doc["x"])),
        p=np.array(doc["p"]),
        v=BlockVector(sizes, np.array(doc["v"])),
        eps=float(doc["eps"]),
    )


def save_certificate(cert: Certificate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(certificate_to_json(cert))


def load_certificate(path) -> Certificate:
    with open(path, "r", encoding="utf-8") as fh:
        return certificate_from_json(fh.read())
