#!/usr/bin/env python3
"""Export torchvision classifier weights to the PPWT format used by protopath.

Usage:
    python tools/export_weights.py --arch resnet18 --out weights/
    python tools/export_weights.py --arch googlenet --out weights/

Writes `<out>/<spec>.ppwt` where spec is `resnet18-imagenet` or
`inceptionv1-imagenet`. Parameter names follow the torchvision state_dict
(`conv1.weight`, `layer1.0.bn1.running_mean`, ...), which is what the Rust
loader expects. Integer bookkeeping tensors (`num_batches_tracked`) are
dropped; everything else is stored as little-endian f32.

Requires torch and torchvision with download access (or a populated
TORCH_HOME cache).
"""

import argparse
import struct
import sys
from pathlib import Path

MAGIC = b"PPWT"
VERSION = 1

SPECS = {
    "resnet18": "resnet18-imagenet",
    "googlenet": "inceptionv1-imagenet",
}


def load_state_dict(arch: str):
    import torchvision.models as models

    if arch == "resnet18":
        model = models.resnet18(weights=models.ResNet18_Weights.IMAGENET1K_V1)
    elif arch == "googlenet":
        model = models.googlenet(weights=models.GoogLeNet_Weights.IMAGENET1K_V1)
    else:
        raise ValueError(f"unsupported arch '{arch}'")
    model.eval()
    return model.state_dict()


def write_ppwt(path: Path, state_dict) -> int:
    import torch

    arrays = []
    for name, tensor in state_dict.items():
        if not torch.is_floating_point(tensor):
            continue  # num_batches_tracked and friends
        arrays.append((name, tensor.detach().to(torch.float32).contiguous()))

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(arrays)))
        for name, tensor in arrays:
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            shape = list(tensor.shape)
            f.write(struct.pack("<I", len(shape)))
            f.write(struct.pack(f"<{len(shape)}I", *shape))
            f.write(tensor.numpy().astype("<f4").tobytes())
    return len(arrays)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--arch", choices=sorted(SPECS), required=True)
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{SPECS[args.arch]}.ppwt"
    state_dict = load_state_dict(args.arch)
    count = write_ppwt(path, state_dict)
    print(f"wrote {count} tensors to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
