"""JSON Schemas (draft 2020-12) for every JSON file the CLI writes, keyed by file name."""

_num = {"type": ["number", "null"]}
_int = {"type": "integer", "minimum": 0}

_dimension_report = {
    "type": ["object", "null"],
    "required": ["deltas", "counts", "dimension", "residual", "heuristic", "content"],
    "properties": {
        "deltas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 4},
        "counts": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 4},
        "dimension": {"type": "number"},
        "residual": {"type": "number", "minimum": 0},
        "heuristic": {"const": True},
        "content": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "number"}}},
    },
}

_corollary = {
    "type": ["object", "null"],
    "required": ["verdict", "reason", "heuristic", "core_size", "dimension_report", "content_flag_d2", "notes"],
    "properties": {
        "verdict": {"type": "string"},
        "reason": {"type": "string"},
        "heuristic": {"const": True},
        "core_size": _int,
        "dimension_report": _dimension_report,
        "content_flag_d2": {"enum": [None, "measure_zero_likely", "positive_measure_likely", "inconclusive"]},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}

CLASSIFY_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "domain", "n_samples", "n_strong", "n_weak", "fraction_strong", "eps_rel", "membership",
                 "levi_closed_form_max_rel_err"],
    "properties": {
        "command": {"const": "classify"},
        "domain": {"type": "string"},
        "n_samples": _int,
        "n_strong": _int,
        "n_weak": _int,
        "fraction_strong": {"type": "number", "minimum": 0, "maximum": 1},
        "eps_rel": {"type": "number", "exclusiveMinimum": 0},
        "membership": {
            "type": "object",
            "required": ["n_outside_band", "agreement"],
            "properties": {"n_outside_band": _int, "agreement": _num, "n_band": _int},
        },
        "levi_closed_form_max_rel_err": _num,
    },
}

CHAIN = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "domain", "n_samples", "stabilized", "stages", "core_size", "params", "corollary"],
    "properties": {
        "command": {"const": "core"},
        "domain": {"type": ["string", "null"]},
        "n_samples": _int,
        "stabilized": {"type": "boolean"},
        "stages": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["stage", "size", "dims", "unresolved", "low_confidence"],
                "properties": {
                    "stage": _int,
                    "size": _int,
                    "dims": {"type": "object", "additionalProperties": _int},
                    "unresolved": _int,
                    "low_confidence": {"type": "boolean"},
                },
            },
        },
        "core_size": _int,
        "params": {"type": "object"},
        "corollary": _corollary,
    },
}

_flag = {"enum": ["measure_zero_likely", "positive_measure_likely", "inconclusive"]}

DIMS = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "heuristic", "target", "report", "content_flags", "corollary"],
    "properties": {
        "command": {"const": "dims"},
        "heuristic": {"const": True},
        "target": {"type": "string"},
        "report": _dimension_report,
        "content_flags": {"type": ["object", "null"], "additionalProperties": _flag},
        "local_slope": {"type": "number"},
        "corollary": _corollary,
    },
}

_check = {"type": "object", "required": ["pass"], "properties": {"pass": {"type": "boolean"}}}

VERIFY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "domain", "checks", "all_pass"],
    "properties": {
        "command": {"const": "verify-example"},
        "domain": {"type": "string"},
        "all_pass": {"type": "boolean"},
        "checks": {
            "type": "object",
            "required": ["a_support_locus", "b_tangent_frame", "c_derived_equals_null", "d_box_dimension"],
            "additionalProperties": _check,
        },
    },
}

WITNESS = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "verdict", "M"],
    "properties": {
        "command": {"const": "witness"},
        "verdict": {"enum": ["pass", "fail", "rejected"]},
        "reason": {"type": ["string", "null"]},
        "point": {"type": ["array", "null"], "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "M": {"type": "number", "exclusiveMinimum": 0},
        "min_M": {"type": "number"},
        "grid_h": _num,
        "n_points": _int,
        "min_lambda": {"type": "number"},
        "max_lambda": {"type": "number"},
        "min_hessian_eig": {"type": "number"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "candidate": {"type": "string"},
        "neighborhood": {"type": "object", "required": ["kind"]},
    },
}

ERROR = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "error", "message", "exit_code"],
    "properties": {
        "command": {"type": "string"},
        "error": {"type": "string"},
        "message": {"type": "string"},
        "exit_code": {"enum": [2, 3, 4]},
    },
}

SCHEMAS = {
    "classify_summary.json": CLASSIFY_SUMMARY,
    "chain.json": CHAIN,
    "dims.json": DIMS,
    "verify.json": VERIFY,
    "witness.json": WITNESS,
    "error.json": ERROR,
}
