# Copyright 2026 The mast-cpp Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Multiscale audio spectrogram transformer — python bindings.

The heavy lifting lives in the C++ core; this package re-exports the main
operations (shape planning, the log-mel frontend, augmentations, the
contrastive losses and the model forward) for quick experiments and smoke
tests.
"""

from mast._core import (
    ArgumentError,
    ConfigError,
    DataError,
    Model,
    conv2d_grid,
    desk_config,
    gelu,
    gen_synthetic,
    info_nce,
    layer_norm,
    log_mel,
    matmul,
    mixup,
    patch_drop_keep,
    pooled_len,
    shape_plan,
    softmax_lastdim,
    symmetric_loss,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "DataError",
    "Model",
    "conv2d_grid",
    "desk_config",
    "gelu",
    "gen_synthetic",
    "info_nce",
    "layer_norm",
    "log_mel",
    "matmul",
    "mixup",
    "patch_drop_keep",
    "pooled_len",
    "shape_plan",
    "softmax_lastdim",
    "symmetric_loss",
]

__version__ = "0.1.0"
