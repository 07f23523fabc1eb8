// Copyright 2026 The SCH Codec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SCH_CLI_H_
#define SCH_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace sch {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,       // unexpected internal error
  kExitUsage = 2,         // bad flags or configuration
  kExitInput = 3,         // unreadable or unsupported input / bad path
  kExitIncompatible = 4,  // model or checkpoint mismatch
  kExitDecode = 5,        // malformed or truncated bitstream
  kExitMetric = 6,        // metric preconditions not met
  kExitDimension = 7,     // tensor shape violation
};

// Names the environment variable holding the default model directory; the
// default checkpoint is <dir>/model.ckpt.
inline constexpr const char* kModelDirEnv = "SCH_MODEL_DIR";

// Runs one subcommand: train, encode, decode, eval, bdrate, erf, attn-dump.
// args[0] is the program name. Errors are reported on `err` as one JSON line.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace sch

#endif  // SCH_CLI_H_
