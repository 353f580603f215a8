#!/usr/bin/env python3
"""Write ImageNet VGG-19 weights as a state dict the C++ loader reads.

Needs torchvision and either network access or a cached checkpoint.
Only the `features.*` tensors are kept.
"""
import argparse
import pathlib

import torch
import torchvision


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("weights/vgg19.pt"))
    args = parser.parse_args()
    model = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1)
    state = {k: v.contiguous() for k, v in model.state_dict().items() if k.startswith("features.")}
    args.out.parent.mkdir(parents=True, exist_ok=True)
    torch.save(state, args.out)
    print(f"wrote {len(state)} tensors to {args.out}")


if __name__ == "__main__":
    main()
