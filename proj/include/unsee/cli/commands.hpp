#pragma once

#include <filesystem>
#include <iosfwd>

#include "unsee/cli/gradcheck.hpp"
#include "unsee/cli/synthetic.hpp"

namespace unsee {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitInputError = 2, kExitAborted = 3 };

// Each command writes results to `out` and problems to `err`; none throws.
int cmd_train(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& pairs,
             std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gen_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir, std::ostream& out,
                   std::ostream& err);
int cmd_diagnose(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus,
                 std::ostream& out, std::ostream& err);

}  // namespace unsee
