"""Meta-transfer zero-shot super-resolution: python bindings for the C++ core."""

from ._core import (
    ArchDescriptor,
    KernelSpec,
    ModelParams,
    RunConfig,
    bicubic_resize,
    blur_reflect,
    build,
    covariance,
    degrade,
    delta_kernel,
    forward,
    load_checkpoint,
    make_lr_son,
    meta_test,
    meta_train,
    mismatch_probe,
    named_kernel,
    param_count,
    pretrain,
    psnr_y,
    rasterize,
    read_png,
    rgb_to_y,
    sample_kernel_params,
    save_checkpoint,
    ssim_y,
    step_loss_weights,
    write_png,
    zssr_baseline,
)

__all__ = [
    "ArchDescriptor",
    "KernelSpec",
    "ModelParams",
    "RunConfig",
    "bicubic_resize",
    "blur_reflect",
    "build",
    "covariance",
    "degrade",
    "delta_kernel",
    "forward",
    "load_checkpoint",
    "make_lr_son",
    "meta_test",
    "meta_train",
    "mismatch_probe",
    "named_kernel",
    "param_count",
    "pretrain",
    "psnr_y",
    "rasterize",
    "read_png",
    "rgb_to_y",
    "sample_kernel_params",
    "save_checkpoint",
    "ssim_y",
    "step_loss_weights",
    "write_png",
    "zssr_baseline",
]
