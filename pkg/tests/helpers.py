import json

from hiertree import parse_predictions

F1_SETS = [("a", "b"), ("a", "b"), ("a", "c"), ("b", "c")]


def jsonl_from_sets(sets, truths=None, prefix="v"):
    lines = []
    for i, s in enumerate(sets):
        truth = truths[i] if truths is not None else None
        top = [{"label": lab} for lab in s]
        lines.append(json.dumps({"video_id": f"{prefix}{i}", "truth": truth, "top": top}))
    return "\n".join(lines) + "\n"


def dataset_from_sets(sets, k=None, truths=None, **kwargs):
    k = k if k is not None else max(len(s) for s in sets)
    kwargs.setdefault("pad_short", True)
    return parse_predictions(jsonl_from_sets(sets, truths), "jsonl", k, **kwargs)
