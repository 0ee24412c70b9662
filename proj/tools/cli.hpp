#pragma once

#include <iosfwd>

namespace detailpp::cli {

// Exit codes: 0 ok, 1 usage, 2 prompt parse error, 3 numeric/config/io error.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace detailpp::cli
