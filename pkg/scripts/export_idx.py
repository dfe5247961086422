"""Write the class-balanced bundled MNIST split as the four IDX files.

The output directory can be passed as ``dataset.path`` to exercise the IDX
loading path without the official files.
"""

import argparse
from pathlib import Path

import numpy as np

from airfl.expcli import default_config, load_dataset, write_idx
from airfl.expcli.dataset import IDX_FILES


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output_dir")
    parser.add_argument("--train-size", type=int, default=4000)
    parser.add_argument("--test-size", type=int, default=1000)
    args = parser.parse_args(argv)

    settings = default_config().dataset
    settings.train_size, settings.test_size = args.train_size, args.test_size
    data = load_dataset(settings)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    to_bytes = lambda x: np.rint(x * 255).astype(np.uint8).reshape(-1, 28, 28)
    write_idx(out / IDX_FILES["train_images"], to_bytes(data.train_x))
    write_idx(out / IDX_FILES["train_labels"], data.train_y.astype(np.uint8))
    write_idx(out / IDX_FILES["test_images"], to_bytes(data.test.features))
    write_idx(out / IDX_FILES["test_labels"], data.test.labels.astype(np.uint8))
    print(f"wrote {len(data.train_y)} train / {len(data.test.labels)} test images to {out}")


if __name__ == "__main__":
    main()
