import numpy as np

from actmon.trace import LayerSpec, TraceMeta, TraceSample, TraceSet


def vec_traces(per_class, layer="Z2", quantity="pre_activation", mispredict=()):
    """TraceSet from per-class (n, d) arrays; all samples correct unless
    their (class, row) pair is listed in mispredict."""
    per_class = [np.asarray(v, dtype=np.float64) for v in per_class]
    dim = per_class[0].shape[1]
    classes = max(len(per_class), 2)
    meta = TraceMeta(
        class_count=classes,
        layers=(LayerSpec(layer, dim, quantity),),
        source="test",
    )
    samples = []
    for c, vectors in enumerate(per_class):
        for i, v in enumerate(vectors):
            pred = (c + 1) % classes if (c, i) in mispredict else c
            samples.append(
                TraceSample(
                    id=f"c{c}-{i:03d}",
                    true_label=c,
                    pred_label=pred,
                    vectors={layer: v},
                )
            )
    return TraceSet(meta=meta, samples=tuple(samples))
