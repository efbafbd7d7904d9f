"""
Interval votes versus Mahalanobis distance
==========================================

Interval monitors treat each neuron independently, so correlated
activations leave large uncovered corners accepted. The multivariate
kind fits a full Gaussian per cluster and thresholds the Mahalanobis
distance instead, which respects correlation at the price of storing a
covariance factor.
"""

import numpy as np

from actmon.monitors import MonitorConfig, calibrate, evaluate, train_monitor
from actmon.trace import LayerSpec, TraceMeta, TraceSample, TraceSet

rng = np.random.default_rng(0)

# strongly correlated 2-D activations: x and y move together for class 0,
# against each other for class 1
blocks = [
    rng.multivariate_normal([0.0, 0.0], [[1.0, 0.95], [0.95, 1.0]], size=400),
    rng.multivariate_normal([8.0, 8.0], [[1.0, -0.95], [-0.95, 1.0]], size=400),
]
meta = TraceMeta(
    class_count=2,
    layers=(LayerSpec(name="Z2", dim=2, quantity="pre_activation"),),
    source="demo",
)
samples = tuple(
    TraceSample(id=f"s{c}{i:04d}", true_label=c, pred_label=c, vectors={"Z2": p}, tags=())
    for c, block in enumerate(blocks)
    for i, p in enumerate(block)
)
traces = TraceSet(meta=meta, samples=samples)


def verdict_for(model, xy):
    sample = TraceSample(
        id="probe", true_label=0, pred_label=0, vectors={"Z2": np.array(xy)}, tags=()
    )
    return evaluate(model, sample).decision


box = calibrate(
    train_monitor(MonitorConfig(layer="Z2", kind="box"), traces), traces, 0.90
)
mvg = calibrate(
    train_monitor(MonitorConfig(layer="Z2", kind="multivariate_gaussian"), traces),
    traces,
    0.90,
)
print(f"box thresholds      vote >= {box.threshold.value:.2f}")
print(f"mahalanobis radius  {mvg.threshold.value:.3f}")

# the anti-correlated corner (2, -2) is inside the box but far in
# Mahalanobis terms; a point along the correlation axis is fine for both
for xy in [(2.0, 2.0), (2.0, -2.0)]:
    print(
        f"point {xy}: box {verdict_for(box, xy):6s} multivariate {verdict_for(mvg, xy):6s}"
    )
