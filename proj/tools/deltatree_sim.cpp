// Cold-cache transfer counts of search paths over a randomly built tree.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "deltatree/cache_sim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Block transfer simulator for ΔNode tree searches"};
  std::uint64_t n = 1 << 20;
  std::uint64_t ub = 127;
  std::uint32_t buffer = 16;
  std::vector<std::uint64_t> blocks{4, 8, 16, 32, 64, 127};
  std::size_t queries = 10'000;
  std::uint64_t seed = 1;
  std::string csv;

  app.add_option("--n", n, "Keys inserted");
  app.add_option("--ub", ub, "Slots per ΔNode (2^h - 1)");
  app.add_option("--buffer", buffer, "Overflow buffer cells per ΔNode");
  app.add_option("--blocks", blocks, "Block sizes in node slots")->delimiter(',');
  app.add_option("--queries", queries, "Random search keys per block size");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--csv", csv, "Also write the table to this file");
  CLI11_PARSE(app, argc, argv);

  try {
    deltatree::TreeConfig tc;
    tc.ub = ub;
    tc.buffer_capacity = buffer;
    deltatree::Tree tree(tc);
    const auto keys = deltatree::build_random_tree(tree, n, seed);
    const auto probe = deltatree::sample_keys(keys, queries, seed + 1);
    const auto rows = deltatree::transfer_sweep(tree, n, blocks, probe);
    deltatree::write_sweep_csv(std::cout, rows);
    if (!csv.empty()) {
      std::ofstream file(csv);
      if (!file) {
        std::cerr << "cannot open " << csv << '\n';
        return 1;
      }
      deltatree::write_sweep_csv(file, rows);
    }
    if (rows.size() >= 3) {
      std::vector<std::pair<std::uint64_t, double>> samples;
      for (const auto& r : rows) samples.emplace_back(r.block_nodes, r.mean_transfers);
      const auto fit = deltatree::fit_transfer_curve(samples);
      std::cerr << "fit: transfers = " << fit.slope << " / log2(B+1) + " << fit.intercept
                << ", rms residual " << fit.residual << " (mean " << fit.mean << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
