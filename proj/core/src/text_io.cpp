#include "text_io.hpp"

#include <zlib.h>

#include <charconv>
#include <memory>

#include "relrec/errors.hpp"

namespace relrec::detail {

namespace {

struct GzCloser {
    void operator()(gzFile f) const noexcept { gzclose(f); }
};

}  // namespace

void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn) {
    // gzread passes uncompressed files through unchanged.
    std::unique_ptr<gzFile_s, GzCloser> file(gzopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open " + path.string());

    std::string pending;
    std::size_t line_no = 0;
    char buf[1 << 16];
    auto emit = [&](std::string_view line) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(++line_no, line);
    };
    for (;;) {
        int n = gzread(file.get(), buf, sizeof buf);
        if (n < 0) {
            int errnum = 0;
            const char* msg = gzerror(file.get(), &errnum);
            throw DataError("read error in " + path.string() + ": " + msg);
        }
        if (n == 0) break;
        std::string_view chunk(buf, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (std::size_t pos; (pos = chunk.find('\n', start)) != std::string_view::npos;
             start = pos + 1) {
            if (pending.empty()) {
                emit(chunk.substr(start, pos - start));
            } else {
                pending.append(chunk.substr(start, pos - start));
                emit(pending);
                pending.clear();
            }
        }
        pending.append(chunk.substr(start));
    }
    if (!pending.empty()) emit(pending);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool skippable(std::string_view line) {
    auto first = line.find_first_not_of(" \t");
    return first == std::string_view::npos || line[first] == '#';
}

bool parse_u64(std::string_view field, std::uint64_t& out) {
    if (field.empty()) return false;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    return ec == std::errc{} && ptr == field.data() + field.size();
}

}  // namespace relrec::detail
