import tensorflow as tf


def dense_init(shape, seed=0):
    return tf.random.stateless_normal(shape, seed=[seed, 0]) * 0.02


def flatten(x):
    return tf.reshape(x, [tf.shape(x)[0], -1])
