#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace slmort {

/// Grid coordinate attached to an error so callers can report the failing cell.
struct Cell {
    int age;
    int year;
};

/// A value lies outside the domain of a mortality conversion or transform.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string &what) : std::domain_error(what) {}
    DomainError(const std::string &what, Cell cell)
        : std::domain_error(what + " at age " + std::to_string(cell.age) + ", year " +
                            std::to_string(cell.year)),
          cell_{cell} {}

    [[nodiscard]] const std::optional<Cell> &cell() const noexcept { return cell_; }

private:
    std::optional<Cell> cell_;
};

/// Malformed or incomplete input data (parse errors carry the line number in the message).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string &what) : std::runtime_error(what) {}
};

/// The bilinear fit lost its age profile or time loading; re-initialise and retry.
class DegenerateFitError : public std::runtime_error {
public:
    explicit DegenerateFitError(const std::string &what) : std::runtime_error(what) {}
};

} // namespace slmort
