"""JSON model documents.

Floats are written with 17 significant digits so every binary64 value
survives a save/load cycle bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np

from ..cascade import FORMAT_VERSION, ESRModel, StageRegressor, TrainParams
from ..features import LocalCoordinates
from ..fern import Fern


class ModelFormatError(ValueError):
    pass


def _encode(obj, indent: int = 0) -> str:
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_encode(v, indent + 2)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        if not obj:
            return "[]"
        items = [pad + "  " + _encode(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            raise ValueError("model contains a non-finite value")
        text = format(v, ".17g")
        if "e" not in text and "." not in text and "n" not in text:
            text += ".0"
        return text
    return json.dumps(obj)


def model_to_dict(model: ESRModel) -> dict:
    p = model.params
    return {
        "format_version": model.format_version,
        "n_fp": model.n_fp,
        "train_params": {
            "n_aug": p.n_aug, "t_stages": p.t_stages, "k_ferns": p.k_ferns,
            "p_pixels": p.p_pixels, "f_features": p.f_features,
            "kappa": float(p.kappa), "beta": float(p.beta), "seed": p.seed,
        },
        "mean_shape": model.mean_shape.ravel().tolist(),
        "init_set": [s.ravel().tolist() for s in model.init_set],
        "stages": [
            {
                "local_coords": [
                    {"l": int(l), "dx": float(dx), "dy": float(dy)}
                    for l, (dx, dy) in zip(st.coords.landmarks, st.coords.offsets)
                ],
                "ferns": [
                    {
                        "pairs": [{"m": int(m), "n": int(n)} for m, n in f.pairs],
                        "thresholds": f.thresholds.tolist(),
                        "bin_outputs": [b.ravel().tolist() for b in f.bin_outputs],
                    }
                    for f in st.ferns
                ],
            }
            for st in model.stages
        ],
    }


def dumps_model(model: ESRModel) -> str:
    return _encode(model_to_dict(model)) + "\n"


def save_model(model: ESRModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_model(model))


def _require(cond, msg):
    if not cond:
        raise ModelFormatError(msg)


def model_from_dict(doc) -> ESRModel:
    _require(isinstance(doc, dict), "model document must be an object")
    version = doc.get("format_version")
    _require(version == FORMAT_VERSION, f"unsupported model format_version {version!r}")
    try:
        n_fp = int(doc["n_fp"])
        params = TrainParams(**doc["train_params"])
        mean = np.asarray(doc["mean_shape"], dtype=np.float64)
        _require(mean.shape == (2 * n_fp,), "mean_shape length does not match n_fp")
        init_set = np.asarray(doc["init_set"], dtype=np.float64)
        _require(init_set.ndim == 2 and init_set.shape[1] == 2 * n_fp and len(init_set) > 0,
                 "init_set must be a non-empty list of shapes matching n_fp")
        stages_doc = doc["stages"]
        _require(isinstance(stages_doc, list), "stages must be a list")
        _require(len(stages_doc) == params.t_stages,
                 f"{len(stages_doc)} stages but train_params declares {params.t_stages}")
        stages = []
        for t, st in enumerate(stages_doc):
            lc = st["local_coords"]
            _require(len(lc) == params.p_pixels,
                     f"stage {t}: {len(lc)} local coords, expected {params.p_pixels}")
            coords = LocalCoordinates([c["l"] for c in lc], [[c["dx"], c["dy"]] for c in lc])
            _require(np.all(coords.landmarks < n_fp), f"stage {t}: landmark index out of range")
            ferns = []
            _require(len(st["ferns"]) in (0, params.k_ferns),
                     f"stage {t}: {len(st['ferns'])} ferns, expected {params.k_ferns}")
            for fd in st["ferns"]:
                pairs = np.array([[p["m"], p["n"]] for p in fd["pairs"]], dtype=np.intp)
                _require(len(pairs) == params.f_features, f"stage {t}: fern feature count mismatch")
                _require(np.all((pairs >= 0) & (pairs < params.p_pixels)),
                         f"stage {t}: pixel index out of range")
                outputs = np.asarray(fd["bin_outputs"], dtype=np.float64)
                _require(outputs.shape == (2 ** params.f_features, 2 * n_fp),
                         f"stage {t}: bin_outputs shape {outputs.shape}")
                ferns.append(Fern(pairs, fd["thresholds"], outputs.reshape(-1, n_fp, 2)))
            stages.append(StageRegressor(coords, tuple(ferns)))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from None
    return ESRModel(mean.reshape(n_fp, 2), stages, n_fp, params,
                    init_set.reshape(-1, n_fp, 2), version)


def loads_model(text: str) -> ESRModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(doc)


def load_model(path) -> ESRModel:
    with open(path) as fh:
        return loads_model(fh.read())
