#include "divrec/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace divrec::bin {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot create " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out)
        throw Error(ErrorCode::IoFailure, "short write to " + path);
}

} // namespace divrec::bin
