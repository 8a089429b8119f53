# pkrank/python/pkrank/__init__.py

# Copyright 2026  The pkrank Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

"""Pairwise comparison ranking of speech enhancement systems."""

from ._pkrank import (  # noqa: F401
    ConfigError,
    DataError,
    Error,
    ModelParams,
    NumericError,
    SystemSet,
    compare,
    estimate_mos,
    init_params,
    krcc,
    lcc,
    load_checkpoint,
    load_set,
    log_mel,
    rank,
    save_checkpoint,
    save_set,
    srcc,
    synth,
    train,
)

__version__ = "0.1.0"
