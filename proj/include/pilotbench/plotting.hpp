// SPDX-License-Identifier: Apache-2.0
//
// Minimal chart output for sweep results: mean curves with confidence
// error bars, rendered to SVG (text labels) and PNG (embedded 5x7 bitmap
// font). Reporting artifacts only; the CSV files are the contract.
#pragma once

#include <string>
#include <vector>

namespace pilotbench {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y, ci;  // ci may be empty
};

struct PlotSpec {
  std::string title, x_label, y_label;
  std::vector<PlotSeries> series;
};

std::string render_svg(const PlotSpec& spec, int width = 720,
                       int height = 480);
// Uncompressed-deflate PNG encoder; no external image libraries.
std::string render_png(const PlotSpec& spec, int width = 720,
                       int height = 480);

bool write_file_atomic(const std::string& path, const std::string& data);

}  // namespace pilotbench
