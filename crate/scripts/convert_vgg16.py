#!/usr/bin/env python3
"""Convert torchvision's ImageNet VGG-16 weights into the encoder archive
read by `mccsod --pretrained` (or the MCCSOD_VGG16 variable).

    python3 scripts/convert_vgg16.py vgg16.safetensors
    python3 scripts/convert_vgg16.py vgg16.safetensors --state-dict vgg16-397923af.pth
"""

import argparse

import torch
import torchvision
from safetensors.torch import save_file

BLOCK_DEPTHS = [2, 2, 3, 3, 3]


def encoder_tensors(features):
    convs = [m for m in features if isinstance(m, torch.nn.Conv2d)]
    assert len(convs) == sum(BLOCK_DEPTHS), len(convs)
    out = {}
    it = iter(convs)
    for block, depth in enumerate(BLOCK_DEPTHS, start=1):
        for conv in range(1, depth + 1):
            layer = next(it)
            name = f"enc.b{block}.c{conv}"
            out[f"{name}.weight"] = layer.weight.detach().float().contiguous()
            out[f"{name}.bias"] = layer.bias.detach().float().contiguous()
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("output")
    p.add_argument("--state-dict", help="local torchvision checkpoint instead of a download")
    args = p.parse_args()

    if args.state_dict:
        model = torchvision.models.vgg16()
        model.load_state_dict(torch.load(args.state_dict, map_location="cpu"))
    else:
        model = torchvision.models.vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)

    tensors = encoder_tensors(model.features)
    save_file(tensors, args.output)
    total = sum(t.numel() for t in tensors.values())
    print(f"wrote {len(tensors)} tensors ({total} parameters) to {args.output}")


if __name__ == "__main__":
    main()
