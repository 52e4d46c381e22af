#pragma once

#include "n1plus/grid.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

using n1plus::Bus;
using n1plus::BusKind;
using n1plus::Grid;
using n1plus::Line;

inline Line line(std::size_t from, std::size_t to, double beta, double limit) {
    Line l;
    l.from = from;
    l.to = to;
    l.stiffness = beta;
    l.limit = limit;
    return l;
}

inline Bus bus(int id, double m, double d, double p) {
    return Bus{id, p > 0.0 ? BusKind::generator : BusKind::load, m, d, p, 1.0};
}

inline std::vector<Bus> zero_mean(std::vector<Bus> buses) {
    double s = 0.0;
    for (const auto& b : buses) {
        s += b.injection;
    }
    buses.back().injection -= s;
    buses.back().kind = buses.back().injection > 0.0 ? BusKind::generator : BusKind::load;
    return buses;
}

/// m = d = beta = 1, p = (+1, -1), limit 2.
inline Grid two_bus() {
    return Grid::create({bus(1, 1.0, 1.0, 1.0), bus(2, 1.0, 1.0, -1.0)}, {line(0, 1, 1.0, 2.0)}, 1);
}

inline Grid triangle() {
    return Grid::create({bus(1, 1.0, 0.5, 1.5), bus(2, 1.2, 0.6, -0.5), bus(3, 0.9, 0.45, -1.0)},
                        {line(0, 1, 10.0, 3.0), line(1, 2, 8.0, 3.0), line(0, 2, 6.0, 3.0)}, 1);
}

/// Ring 1-2-3-4-1, all beta = 2. Unequal inertias keep the spectrum simple.
inline Grid ring4() {
    return Grid::create({bus(1, 1.0, 0.5, 1.0), bus(2, 1.2, 0.6, -0.5), bus(3, 0.9, 0.45, 0.5),
                         bus(4, 1.1, 0.55, -1.0)},
                        {line(0, 1, 2.0, 1.5), line(1, 2, 2.0, 1.5), line(2, 3, 2.0, 1.5),
                         line(3, 0, 2.0, 1.5)},
                        1);
}

/// Ring of n buses plus chords (i, i + n/2) every `chord_every` buses; deterministic,
/// mildly heterogeneous parameters. Every line lies on a cycle.
inline Grid ring_with_chords(std::size_t n, std::size_t chord_every, double limit, int reference = 1) {
    std::vector<Bus> buses;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        const double m = 1.0 + 0.3 * std::sin(1.7 * x + 0.4);
        const double d = 0.5 * m * (1.0 + 0.2 * std::cos(2.3 * x));
        const double p = 0.8 * std::sin(2.1 * x + 1.0);
        buses.push_back(bus(static_cast<int>(i + 1), m, d, p));
    }
    std::vector<Line> lines;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        lines.push_back(line(i, (i + 1) % n, 9.0 + 3.0 * std::sin(1.3 * x + 0.2), limit));
    }
    for (std::size_t i = 0; i < n / 2; i += chord_every) {
        const double x = static_cast<double>(i);
        lines.push_back(line(i, i + n / 2, 7.0 + 2.0 * std::cos(0.9 * x), limit));
    }
    return Grid::create(zero_mean(std::move(buses)), std::move(lines), reference);
}

/// 6 buses, 9 lines.
inline Grid mesh6() { return ring_with_chords(6, 1, 3.0); }

/// 10 buses, 15 lines.
inline Grid ring10() { return ring_with_chords(10, 1, 3.0); }

/// 32 buses, 36 lines.
inline Grid synthetic32() { return ring_with_chords(32, 4, 3.0); }

/// Triangle with a tight line 1-2. While line 1-3 is out all demand flows over 1-2,
/// which stays overloaded for the length of the fault.
inline Grid stressed3() {
    return Grid::create({bus(1, 1.0, 1.0, 1.0), bus(2, 1.0, 1.0, -0.5), bus(3, 1.0, 1.0, -0.5)},
                        {line(0, 1, 5.0, 0.8), line(1, 2, 5.0, 1.2), line(0, 2, 5.0, 1.2)}, 1);
}

/// Complete graph on 4 identical buses; its spectrum has triple eigenvalues.
inline Grid symmetric_k4() {
    std::vector<Line> lines;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            lines.push_back(line(i, j, 1.0, 5.0));
        }
    }
    return Grid::create({bus(1, 1.0, 0.5, 0.5), bus(2, 1.0, 0.5, -0.5), bus(3, 1.0, 0.5, 0.5),
                         bus(4, 1.0, 0.5, -0.5)},
                        std::move(lines), 1);
}

struct Named {
    std::string name;
    Grid grid;
};

/// The 2 to 10 bus fixtures.
inline std::vector<Named> small_fixtures() {
    return {{"two_bus", two_bus()}, {"triangle", triangle()}, {"ring4", ring4()},
            {"mesh6", mesh6()},     {"ring10", ring10()}};
}

}  // namespace fixtures
