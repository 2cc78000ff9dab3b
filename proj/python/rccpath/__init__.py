# Copyright 2026 The rccpath Authors. All Rights Reserved.
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


"""Whole-slide renal cell carcinoma analysis engine."""

import json

from ._core import (
    Classifier,
    Pyramid,
    RccpathError,
    __version__,
    aggregate_grade,
    aggregate_subtypes,
    cohens_kappa,
    config_digest,
    config_json,
    estimate_stain_profile,
    intensity_from_od,
    load_classifier,
    needs_secondary,
    normalize,
    optical_density,
    patch_area_mm2,
    read_image,
    render_report,
    softmax,
    write_png,
)
from ._core import run_pipeline as _run_pipeline


def run_pipeline(config, manifest, output=None, workers=None, force_ingest=False):
    """Runs the full pipeline; each slide entry carries its report as a dict."""
    result = _run_pipeline(str(config), str(manifest), None if output is None else str(output),
                           workers, force_ingest)
    for slide in result["slides"]:
        text = slide.pop("report_json")
        slide["report"] = None if text is None else json.loads(text)
    return result


__all__ = [
    "Classifier", "Pyramid", "RccpathError", "__version__", "aggregate_grade", "aggregate_subtypes",
    "cohens_kappa", "config_digest", "config_json", "estimate_stain_profile", "intensity_from_od",
    "load_classifier", "needs_secondary", "normalize", "optical_density", "patch_area_mm2",
    "read_image", "render_report", "run_pipeline", "softmax", "write_png",
]
