#include "s2c/types.hpp"

namespace s2c {

const ImagePair& validate(const ImagePair& pair) {
  if (!pair.t1.same_shape(pair.t2) || pair.t1.channels() != pair.t2.channels())
    throw ShapeMismatch("validate: t1/t2 dimensions differ");
  if (pair.label &&
      (pair.label->h != pair.t1.height() || pair.label->w != pair.t1.width()))
    throw ShapeMismatch("validate: label dimensions differ");
  pair.t1.validate_values();
  pair.t2.validate_values();
  return pair;
}

}  // namespace s2c
