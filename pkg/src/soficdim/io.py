"""JSON model formats and atomic report/CSV emission.

Schemas:
  model     {"weights": [..], "blocks": [[..],..], "generators": [{"pairs": [[s,t],..]},..]}
  graphing  model schema plus "morphisms": [{"pairs": [[s,t],..]},..]
  sofic     {"d": n, "images": {label: {"pairs": ..} | {"diag": [0/1,..]}},
             "atom_blocks": [[lo,hi],..]?}
  graph     {"n": v, "edges": [[u,v],..]}
  fields    {"fields": [{"fibers": [[..],..]},..]} or one {"fibers": ..}

Weights may be numbers or "p/q" strings; loaders validate every structural
invariant and fail naming the offending field.  All writers go through a
temp-file-plus-rename so partial reports never appear on disk.
"""

import json
import os
import tempfile

from ._validation import ModelError
from .graphcoh import Graph, GraphError
from .graphings import Graphing
from .norms import VectorField
from .relations import AtomSpace, FinRel, Model, PartialMap
from .sofic import SoficApprox

SCHEMA_VERSION = "1"


def _read(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: not valid JSON ({e})") from e


def _require(doc, key, path):
    if key not in doc:
        raise ModelError(f"{path}: missing required field {key!r}")
    return doc[key]


def load_model(path) -> Model:
    doc = _read(path)
    space = AtomSpace.make(_require(doc, "weights", path))
    rel = FinRel.make(space, _require(doc, "blocks", path))
    gens = []
    for gi, g in enumerate(doc.get("generators", [])):
        try:
            gens.append(PartialMap.make(space.n_atoms, _require(g, "pairs", f"{path}: generators[{gi}]")))
        except ModelError as e:
            raise ModelError(f"{path}: generators[{gi}]: {e}") from e
    try:
        return Model.make(rel, gens)
    except ModelError as e:
        raise ModelError(f"{path}: {e}") from e


def load_graphing(path) -> Graphing:
    doc = _read(path)
    model = load_model(path)
    if "morphisms" not in doc:
        return Graphing.from_model(model)
    morphisms = []
    for mi, m in enumerate(doc["morphisms"]):
        try:
            morphisms.append(
                PartialMap.make(model.n_atoms, _require(m, "pairs", f"{path}: morphisms[{mi}]"))
            )
        except ModelError as e:
            raise ModelError(f"{path}: morphisms[{mi}]: {e}") from e
    try:
        return Graphing.make(model.rel, morphisms)
    except ModelError as e:
        raise ModelError(f"{path}: {e}") from e


def load_graph(path) -> Graph:
    doc = _read(path)
    try:
        g = Graph.make(_require(doc, "n", path), _require(doc, "edges", path))
    except GraphError as e:
        raise GraphError(f"{path}: {e}") from e
    if g.n and int(g.degrees.min()) == 0:
        raise GraphError(f"{path}: vertex {int(g.degrees.argmin())} is isolated")
    return g


def load_vector_fields(path, space) -> list:
    doc = _read(path)
    entries = doc["fields"] if "fields" in doc else [doc]
    fields = []
    for fi, entry in enumerate(entries):
        try:
            fields.append(VectorField.make(space, _require(entry, "fibers", f"{path}: fields[{fi}]")))
        except ModelError as e:
            raise ModelError(f"{path}: fields[{fi}]: {e}") from e
    return fields


def load_sofic(path) -> SoficApprox:
    doc = _read(path)
    d = int(_require(doc, "d", path))
    images = {}
    for label, img in _require(doc, "images", path).items():
        if "pairs" in img:
            images[label] = PartialMap.make(d, img["pairs"])
        elif "diag" in img:
            diag = img["diag"]
            if len(diag) != d:
                raise ModelError(f"{path}: images[{label}]: diag length {len(diag)} != d={d}")
            images[label] = tuple(int(bool(b)) for b in diag)
        else:
            raise ModelError(f"{path}: images[{label}]: needs 'pairs' or 'diag'")
    atom_blocks = doc.get("atom_blocks")
    if atom_blocks is not None:
        atom_blocks = tuple((int(lo), int(hi)) for lo, hi in atom_blocks)
    return SoficApprox(d=d, images=images, atom_blocks=atom_blocks)


def sofic_to_doc(sigma: SoficApprox) -> dict:
    images = {}
    for label, img in sorted(sigma.images.items()):
        if isinstance(img, PartialMap):
            images[label] = {"pairs": [list(p) for p in img.pairs]}
        else:
            images[label] = {"diag": list(img)}
    doc = {"d": sigma.d, "images": images}
    if sigma.atom_blocks is not None:
        doc["atom_blocks"] = [list(b) for b in sigma.atom_blocks]
    return doc


def write_json_atomic(path, doc):
    path = os.fspath(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(path, columns, rows, comment=None):
    """CSV with a versioned header comment; floats via repr for replayability."""
    path = os.fspath(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")

    def cell(x):
        if x is None:
            return ""
        if isinstance(x, float):
            return repr(x)
        return str(x)

    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(f"# soficdim csv v{SCHEMA_VERSION}" + (f" {comment}" if comment else "") + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(cell(x) for x in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
