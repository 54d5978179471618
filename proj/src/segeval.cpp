#include "asbu/segeval.hpp"

#include <cmath>
#include <deque>

namespace asbu {

BinaryMask::BinaryMask(int h_, int w_, std::uint8_t fill) : h(h_), w(w_) {
    if (h < 1 || w < 1) throw ShapeError("mask dimensions must be >= 1");
    if (fill > 1) throw ShapeError("mask fill must be 0 or 1");
    bits.assign(static_cast<std::size_t>(h) * w, fill);
}

std::int64_t BinaryMask::count() const {
    std::int64_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
}

namespace {

void check_binary(const BinaryMask& m, const char* what) {
    if (static_cast<std::int64_t>(m.bits.size()) != static_cast<std::int64_t>(m.h) * m.w) {
        throw ShapeError(std::string(what) + ": bit count does not match dims");
    }
    for (std::uint8_t b : m.bits) {
        if (b > 1) throw ShapeError(std::string(what) + ": mask values must be 0 or 1");
    }
}

void check_pair(const BinaryMask& a, const BinaryMask& b) {
    if (a.h != b.h || a.w != b.w) {
        throw ShapeError("mask pair: shape mismatch");
    }
    check_binary(a, "label");
    check_binary(b, "pred");
}

std::vector<std::pair<int, int>> disk_offsets(int radius) {
    std::vector<std::pair<int, int>> offs;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dy * dy + dx * dx <= radius * radius) offs.emplace_back(dy, dx);
        }
    }
    return offs;
}

}  // namespace

int object_radius(std::int64_t area, const IgnoreBandParams& params) {
    int r = static_cast<int>(std::lround(params.osf_beta * std::sqrt(static_cast<double>(area))));
    return std::max(params.min_radius, r);
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    check_binary(mask, "dilate");
    if (radius < 0) throw ShapeError("dilate: negative radius");
    BinaryMask out(mask.h, mask.w, 0);
    auto offs = disk_offsets(radius);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x)) continue;
            for (auto [dy, dx] : offs) {
                int ny = y + dy, nx = x + dx;
                if (ny >= 0 && ny < mask.h && nx >= 0 && nx < mask.w) out.at(ny, nx) = 1;
            }
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    check_binary(mask, "erode");
    if (radius < 0) throw ShapeError("erode: negative radius");
    BinaryMask out(mask.h, mask.w, 0);
    auto offs = disk_offsets(radius);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            bool all = true;
            for (auto [dy, dx] : offs) {
                int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;  // border: fg
                if (!mask.at(ny, nx)) {
                    all = false;
                    break;
                }
            }
            out.at(y, x) = all ? 1 : 0;
        }
    }
    return out;
}

int connected_components(const BinaryMask& mask, std::vector<int>& labels) {
    check_binary(mask, "connected_components");
    labels.assign(mask.bits.size(), 0);
    int next = 0;
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x) || labels[static_cast<std::size_t>(y) * mask.w + x]) continue;
            ++next;
            labels[static_cast<std::size_t>(y) * mask.w + x] = next;
            queue.emplace_back(y, x);
            while (!queue.empty()) {
                auto [cy, cx] = queue.front();
                queue.pop_front();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dy && !dx) continue;
                        int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;
                        std::size_t ni = static_cast<std::size_t>(ny) * mask.w + nx;
                        if (mask.bits[ni] && !labels[ni]) {
                            labels[ni] = next;
                            queue.emplace_back(ny, nx);
                        }
                    }
                }
            }
        }
    }
    return next;
}

BinaryMask ignore_band(const BinaryMask& label, const IgnoreBandParams& params) {
    check_binary(label, "ignore_band");
    std::vector<int> comp;
    int n = connected_components(label, comp);

    BinaryMask band(label.h, label.w, 0);
    for (int id = 1; id <= n; ++id) {
        BinaryMask object(label.h, label.w, 0);
        std::int64_t area = 0;
        for (std::size_t i = 0; i < comp.size(); ++i) {
            if (comp[i] == id) {
                object.bits[i] = 1;
                ++area;
            }
        }
        int radius = object_radius(area, params);
        BinaryMask grown = dilate(object, radius);
        BinaryMask shrunk = erode(object, radius);
        for (std::size_t i = 0; i < band.bits.size(); ++i) {
            band.bits[i] |= grown.bits[i] ^ shrunk.bits[i];
        }
    }
    BinaryMask counted(label.h, label.w, 0);
    for (std::size_t i = 0; i < band.bits.size(); ++i) {
        counted.bits[i] = band.bits[i] ? 0 : 1;
    }
    return counted;
}

double masked_jaccard(const BinaryMask& label, const BinaryMask& pred,
                      const IgnoreBandParams& params) {
    check_pair(label, pred);
    BinaryMask counted = ignore_band(label, params);
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < counted.bits.size(); ++i) {
        std::uint8_t y = label.bits[i] & counted.bits[i];
        std::uint8_t p = pred.bits[i] & counted.bits[i];
        inter += y & p;
        uni += y | p;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct PenaltyResult {
    double jaccard = 0.0;
    int misdetections = 0;
};

PenaltyResult scored_pair(const BinaryMask& label, const BinaryMask& pred,
                          const IgnoreBandParams& params) {
    check_pair(label, pred);
    BinaryMask counted = ignore_band(label, params);

    // Components are taken on the raw prediction: masking first would cut
    // boundary fragments off their (correct) detection and bill them as
    // false detections, defeating the band's purpose. A misdetection is a
    // raw component with zero label overlap that shows up outside the band.
    std::vector<int> comp;
    int n = connected_components(pred, comp);
    std::vector<bool> overlaps(static_cast<std::size_t>(n) + 1, false);
    std::vector<bool> outside(static_cast<std::size_t>(n) + 1, false);
    for (std::size_t i = 0; i < comp.size(); ++i) {
        if (!comp[i]) continue;
        if (label.bits[i]) overlaps[static_cast<std::size_t>(comp[i])] = true;
        if (counted.bits[i]) outside[static_cast<std::size_t>(comp[i])] = true;
    }
    std::vector<bool> misdet(static_cast<std::size_t>(n) + 1, false);
    PenaltyResult r;
    for (int id = 1; id <= n; ++id) {
        std::size_t k = static_cast<std::size_t>(id);
        if (!overlaps[k] && outside[k]) {
            misdet[k] = true;
            ++r.misdetections;
        }
    }

    // Penalized components carry the flat -1.0 and leave the Jaccard union.
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < counted.bits.size(); ++i) {
        std::uint8_t y = label.bits[i] & counted.bits[i];
        std::uint8_t p = pred.bits[i] & counted.bits[i];
        if (p && misdet[static_cast<std::size_t>(comp[i])]) p = 0;
        inter += y & p;
        uni += y | p;
    }
    r.jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    return r;
}

}  // namespace

int count_misdetections(const BinaryMask& label, const BinaryMask& pred,
                        const IgnoreBandParams& params) {
    return scored_pair(label, pred, params).misdetections;
}

double score_with_penalty(const BinaryMask& label, const BinaryMask& pred,
                          const IgnoreBandParams& params) {
    PenaltyResult r = scored_pair(label, pred, params);
    return r.jaccard - static_cast<double>(r.misdetections);
}

EvalReport evaluate_dataset(const std::vector<BinaryMask>& labels,
                            const std::vector<BinaryMask>& preds,
                            const IgnoreBandParams& params,
                            const std::vector<std::string>* names) {
    if (labels.size() != preds.size()) {
        throw ShapeError("evaluate_dataset: label/pred count mismatch");
    }
    if (labels.empty()) {
        throw ShapeError("evaluate_dataset: empty dataset");
    }
    EvalReport rep;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        PenaltyResult r = scored_pair(labels[i], preds[i], params);
        EvalEntry e;
        e.name = names ? (*names)[i] : "pair" + std::to_string(i);
        e.jaccard = r.jaccard;
        e.misdetections = r.misdetections;
        e.score = r.jaccard - static_cast<double>(r.misdetections);
        rep.mean_score += e.score;
        rep.mean_jaccard += e.jaccard;
        rep.total_misdetections += e.misdetections;
        rep.entries.push_back(std::move(e));
    }
    rep.mean_score /= static_cast<double>(labels.size());
    rep.mean_jaccard /= static_cast<double>(labels.size());
    return rep;
}

}  // namespace asbu
