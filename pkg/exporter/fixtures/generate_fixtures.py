"""Build the committed exporter fixtures: a small trained classifier
(actmon net.json format) plus bar-image datasets in the exporter's
dataset JSON format. Rerunning reproduces the same bytes.

Usage: python3 generate_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from actmon import nn

HERE = Path(__file__).parent
SIDE = 6
CLASSES = 3
PER_CLASS = 300
SPLITS = (("train", 0.5), ("calib", 0.25), ("test", 0.25))


def bar_image(rng, label):
    """Class 0: horizontal bar, 1: vertical bar, 2: main-diagonal stripe."""
    img = rng.uniform(0.0, 0.15, size=(SIDE, SIDE))
    pos = int(rng.integers(0, SIDE))
    strength = float(rng.uniform(0.6, 1.0))
    if label == 0:
        img[pos, :] = strength
    elif label == 1:
        img[:, pos] = strength
    else:
        shift = int(rng.integers(-2, 3))
        for i in range(SIDE):
            j = i + shift
            if 0 <= j < SIDE:
                img[i, j] = strength
    return np.clip(img, 0.0, 1.0).reshape(-1)


def checker_image(rng):
    """Novelty concept: a checkerboard, never seen in training."""
    img = np.indices((SIDE, SIDE)).sum(axis=0) % 2
    img = img * float(rng.uniform(0.6, 1.0))
    img += rng.uniform(0.0, 0.15, size=(SIDE, SIDE))
    return np.clip(img, 0.0, 1.0).reshape(-1)


def sample_record(prefix, index, label, split, pixels):
    return {
        "id": f"{prefix}{index:04d}",
        "label": label,
        "split": split,
        "pixels": [round(float(p), 4) for p in pixels],
    }


def main():
    rng = np.random.default_rng(42)
    samples = []
    xs, ys = [], []
    index = 0
    for label in range(CLASSES):
        boundaries = []
        offset = 0
        for _, frac in SPLITS:
            offset += int(round(PER_CLASS * frac))
            boundaries.append(offset)
        for i in range(PER_CLASS):
            split = next(
                name for (name, _), end in zip(SPLITS, boundaries) if i < end
            )
            pixels = bar_image(rng, label)
            pixels = np.array([round(float(p), 4) for p in pixels])
            samples.append(sample_record("img", index, label, split, pixels))
            xs.append(pixels)
            ys.append(label)
            index += 1

    result = nn.train_mlp(
        list(zip(xs, ys)),
        [(SIDE * SIDE, 24, nn.RELU), (24, 16, nn.RELU), (16, CLASSES, nn.IDENTITY)],
        nn.TrainConfig(learning_rate=0.1, epochs=60, batch_size=32, seed=0),
    )
    preds = nn.predict_batch(result.net, np.stack(xs))
    accuracy = (preds == np.array(ys)).mean()
    print(f"fixture model accuracy {accuracy:.4f} final loss {result.final_loss:.4f}")
    assert accuracy >= 0.95

    nn.save_net(result.net, HERE / "model.json")
    dataset = {
        "width": SIDE,
        "height": SIDE,
        "classes": CLASSES,
        "samples": samples,
    }
    (HERE / "dataset.json").write_text(json.dumps(dataset) + "\n")

    novelty = {
        "width": SIDE,
        "height": SIDE,
        "classes": CLASSES,
        "samples": [
            sample_record("odd", i, 0, "test", checker_image(rng)) for i in range(60)
        ],
    }
    (HERE / "novelty.json").write_text(json.dumps(novelty) + "\n")
    print(f"wrote {len(samples)} dataset samples and 60 novelty samples")


if __name__ == "__main__":
    main()
