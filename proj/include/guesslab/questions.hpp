#pragma once

#include <set>
#include <string>
#include <vector>

#include "guesslab/numerics.hpp"
#include "guesslab/world.hpp"

namespace guesslab {

enum class QType {
    Supercategory = 0,
    Object = 1,
    Color = 2,
    Size = 3,
    Texture = 4,
    Shape = 5,
    Location = 6,
};
inline constexpr std::size_t kNumQTypes = 7;

std::string qtype_name(QType t);
QType qtype_from_name(const std::string& name);

enum class Answer { Yes = 0, No = 1, NA = 2 };

std::string answer_name(Answer a);
Answer answer_from_name(const std::string& name);

enum class Region { TopLeft = 0, TopRight = 1, BottomLeft = 2, BottomRight = 3, Middle = 4 };
inline constexpr std::size_t kNumRegions = 5;

extern const char* const kRegionNames[kNumRegions];

struct Question {
    QType qtype = QType::Object;
    int argument = 0;
    std::string text;

    bool operator==(const Question& o) const {
        return qtype == o.qtype && argument == o.argument;
    }
};

/// Template table, rendering, fixed-width encoding, and ground-truth answers
/// for the symbolic question space of one vocabulary. Template ids enumerate
/// (qtype, argument) pairs in a fixed documented order: supercategory,
/// object, color, size, texture, shape, location, each with arguments
/// ascending.
class QuestionBank {
  public:
    QuestionBank(const CategoryVocabulary& vocab, std::set<QType> disabled = {});

    const CategoryVocabulary& vocab() const { return *vocab_; }

    std::size_t num_templates() const { return templates_.size(); }
    const Question& question(std::size_t template_id) const { return templates_[template_id]; }
    std::size_t template_id(QType t, int argument) const;

    /// Question templates the questioner may use: arguments restricted to
    /// in-domain categories and their supercategories, all attribute values,
    /// all regions. Sorted ascending.
    const std::vector<std::size_t>& questioner_pool() const { return questioner_pool_; }

    /// one-hot(qtype) ++ one-hot(argument), zero-padded; length d_q().
    Vec encode(const Question& q) const;
    std::size_t d_q() const { return kNumQTypes + max_arg_space_; }
    std::size_t arg_space(QType t) const;

    /// Deterministic rule per question type; NA only for disabled types.
    Answer ground_truth(const Scene& scene, const GameObject& obj, const Question& q) const;

    std::string render(QType t, int argument) const;

    /// Animacy subtag for object questions; false for anything else.
    bool is_animate_object_question(const Question& q) const;

    /// Region membership test used by location questions. Quadrants split at
    /// the image center; "middle" is the centered half-width box. Regions
    /// overlap by construction.
    static bool in_region(double x_center_norm, double y_center_norm, Region r);

    const std::set<QType>& disabled() const { return disabled_; }

  private:
    const CategoryVocabulary* vocab_;
    std::set<QType> disabled_;
    std::vector<Question> templates_;
    std::vector<std::size_t> questioner_pool_;
    std::size_t max_arg_space_ = 0;
};

/// Writes the template table (template id, qtype, argument, surface text) as
/// a versioned text table.
void write_template_table(const std::string& path, const QuestionBank& bank);

}  // namespace guesslab
