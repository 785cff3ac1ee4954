#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace streamhist {

enum class errc {
    length_not_multiple_of_four,
    count_overflow,
    sub_counter_overflow,
    invalid_pattern,
    slot_count_out_of_range,
    empty_histogram,
    negative_count,
    source_exhausted,
    file_unreadable,
    spec_invalid,
    invalid_config,
};

auto to_string(errc code) -> std::string_view;

// Every failure raised by the library carries one of the codes above.
class error : public std::runtime_error {
  public:
    error(errc code, std::string const &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what),
          code_(code), detail_(what) {}

    [[nodiscard]] auto code() const noexcept -> errc { return code_; }
    [[nodiscard]] auto detail() const noexcept -> std::string const & {
        return detail_;
    }

  private:
    errc code_;
    std::string detail_;
};

} // namespace streamhist
