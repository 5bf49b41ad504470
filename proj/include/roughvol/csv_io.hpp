#pragma once

// CSV readers and writers. Numbers are written with %.17g so files round-trip exactly.

#include <iosfwd>
#include <string>

#include "roughvol/invert.hpp"
#include "roughvol/qmle.hpp"
#include "roughvol/sim.hpp"

namespace roughvol {

/// t,x_1..x_d,z_1..z_d, one row per fine-grid node.
void write_path_csv(std::ostream& out, const SimulatedPath<double>& path);

/// Reads t,x_1..x_d (trailing z_ columns are ignored, so path files load directly) and keeps
/// every stride-th row. Raises InputError on malformed rows or a non-constant step.
SampledObservation<double> read_observation_csv(std::istream& in, const std::string& source = "<input>",
                                                std::size_t stride = 1);

/// t,z_1..z_d on the block grid.
void write_reconstruction_csv(std::ostream& out, const ReconstructedPath<double>& recon);

/// theta_1..theta_p,contrast,n_blocks,converged,method
void write_estimation_csv(std::ostream& out, const EstimationResult<double>& result);

}  // namespace roughvol
